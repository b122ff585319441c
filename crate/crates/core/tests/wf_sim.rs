use langchange::wf_sim::{simulate_many, simulate_run, Population, SimConfig, Topology};

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

// Two speakers, one innovator, ε = 1, s = 0: each tick both speakers copy an
// independent draw from {0, 1}, so absorption happens with probability 1/2
// per tick and fixation and loss are equally likely. The absorption time is
// geometric with mean 2 and variance 2.
#[test]
fn two_speaker_chain_matches_exact_solution() {
    let cfg = SimConfig {
        seed: 5,
        ..SimConfig::new(2, 1.0, 0.0, 1.0)
    };
    let pop = Population::new(&cfg).unwrap();
    let runs = 200_000u64;
    let out = simulate_many(&pop, runs);
    let fixed = out.iter().filter(|o| o.fixed).count() as f64 / runs as f64;
    assert!((fixed - 0.5).abs() < 4.0 * binomial_se(0.5, runs), "{fixed}");
    let times: Vec<f64> = out.iter().map(|o| o.time).collect();
    let mean = times.iter().sum::<f64>() / runs as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    assert!((mean - 2.0).abs() < 0.02, "{mean}");
    assert!((var - 2.0).abs() < 0.06, "{var}");
}

#[test]
fn neutral_fixation_fraction_is_initial_mean() {
    for (n, eps) in [(20, 1.0), (20, 0.3)] {
        let cfg = SimConfig {
            seed: 9,
            ..SimConfig::new(n, eps, 0.0, 1.0)
        };
        let pop = Population::new(&cfg).unwrap();
        let runs = 100_000u64;
        let fixed = simulate_many(&pop, runs).iter().filter(|o| o.fixed).count() as f64 / runs as f64;
        // the initiator starts at x = ε
        let q = eps / n as f64;
        assert!((fixed - q).abs() < 3.0 * binomial_se(q, runs), "N={n} ε={eps}: {fixed}");
    }
}

#[test]
fn boundary_states_are_absorbing_without_innovation() {
    for topology in [Topology::Homogeneous, Topology::Network { nu: 1.5, z_min: 2 }] {
        // initiators start at x = ε, so only ε = 1 can start fixed
        for (x0, eps, fixed) in [(0, 0.5, false), (30, 1.0, true)] {
            let cfg = SimConfig {
                x0_speakers: x0,
                topology,
                trajectory_stride: 1,
                ..SimConfig::new(30, eps, 0.2, 1.0)
            };
            let out = simulate_run(&cfg).unwrap();
            assert_eq!(out.fixed, fixed);
            assert_eq!(out.steps, 0);
            assert!(out.trajectory.iter().all(|p| p.mean == x0 as f64 / 30.0));
        }
    }
}

#[test]
fn neutral_mean_frequency_is_a_martingale() {
    // E[x_t] = x_0 at every t for s = 0, η = 0; here x_0 = 10 ε / N.
    let n = 40;
    let stride = 5u64;
    let cfg = SimConfig {
        x0_speakers: 10,
        trajectory_stride: stride,
        seed: 21,
        ..SimConfig::new(n, 0.5, 0.0, 1.0)
    };
    let pop = Population::new(&cfg).unwrap();
    let runs = 20_000u64;
    let out = simulate_many(&pop, runs);
    for k in [1usize, 4, 10, 20] {
        let values: Vec<f64> = out
            .iter()
            .map(|o| {
                let last = o.trajectory.last().unwrap().mean;
                o.trajectory.get(k).map_or(last, |p| p.mean)
            })
            .collect();
        let mean = values.iter().sum::<f64>() / runs as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt();
        let se = sd / (runs as f64).sqrt();
        assert!(
            (mean - 0.125).abs() < 4.0 * se + 1e-12,
            "tick {}: {mean} ± {se}",
            k as u64 * stride
        );
    }
}

#[test]
fn runs_do_not_depend_on_thread_count() {
    let cfg = SimConfig {
        seed: 77,
        topology: Topology::Network { nu: 2.0, z_min: 2 },
        ..SimConfig::new(50, 0.5, 0.02, 1.0)
    };
    let pop = Population::new(&cfg).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| simulate_many(&pop, 3000));
    let b = four.install(|| simulate_many(&pop, 3000));
    assert_eq!(a, b);
    assert_eq!(a[17], pop.run(17));
}
