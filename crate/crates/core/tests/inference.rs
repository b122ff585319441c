use langchange::data::{default_data_dir, Article, Dataset};
use langchange::demography::{language_mean_size_from_weight, DemographyFit};
use langchange::inference::{evaluate_scenario, fit_poisson_baseline, monte_carlo_gof, ScenarioSpec};
use langchange::likelihood::{InversionConfig, OriginFixationParams};

fn load() -> (Dataset, Vec<f64>) {
    let dir = default_data_dir();
    let ds = Dataset::load_dir(&dir).unwrap();
    let fit = DemographyFit::load(&dir.join("demography_fit.json")).unwrap();
    let sizes = ds
        .histories
        .iter()
        .map(|h| language_mean_size_from_weight(h, &fit).unwrap())
        .collect();
    (ds, sizes)
}

#[test]
fn baseline_fits_match_reference_values() {
    let (ds, _) = load();
    let cfg = InversionConfig::default();
    let def = fit_poisson_baseline(&ds.histories, Article::Definite, ds.wals.get(Article::Definite), &cfg).unwrap();
    let ind = fit_poisson_baseline(
        &ds.histories,
        Article::Indefinite,
        ds.wals.get(Article::Indefinite),
        &cfg,
    )
    .unwrap();
    assert!((def.mle_value / 6.0538e-4 - 1.0).abs() < 1e-3, "{}", def.mle_value);
    assert!((ind.mle_value / 5.6739e-4 - 1.0).abs() < 1e-3, "{}", ind.mle_value);
    assert!((def.aicc - 128.19).abs() < 0.05, "{}", def.aicc);
    assert!((ind.aicc - 93.607).abs() < 0.05, "{}", ind.aicc);
    assert!(!def.at_boundary && !ind.at_boundary);
}

#[test]
fn instant_child_learning_is_strongly_disfavoured() {
    let (ds, sizes) = load();
    let cfg = InversionConfig::default();
    for (article, expected) in [(Article::Definite, 204.04), (Article::Indefinite, 58.43)] {
        let dist = ds.wals.get(article);
        let base = fit_poisson_baseline(&ds.histories, article, dist, &cfg).unwrap();
        let spec = ScenarioSpec::child(f64::INFINITY);
        let r = evaluate_scenario(&ds.histories, article, &spec, &sizes, dist, Some(&base), &cfg, 7).unwrap();
        let d = r.delta_aicc.unwrap();
        assert!((d - expected).abs() < 0.1, "{article}: {d}");
    }
}

#[test]
fn gof_is_reproducible_and_bounded() {
    let (ds, _) = load();
    let cfg = InversionConfig::default();
    let article = Article::Indefinite;
    let dist = ds.wals.get(article);
    let base = fit_poisson_baseline(&ds.histories, article, dist, &cfg).unwrap();
    let params = vec![OriginFixationParams::poisson(base.mle_value, dist); ds.histories.len()];
    let a = monte_carlo_gof(&ds.histories, article, &params, 4000, 11, &cfg).unwrap();
    let b = monte_carlo_gof(&ds.histories, article, &params, 4000, 11, &cfg).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.p_value));
    assert!(a.overdispersion_changes > 0.5 && a.overdispersion_changes < 2.0);
}
