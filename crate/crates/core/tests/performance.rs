mod common;

use t2var::charts::{build_design, ChartDesign, ChartMode, Phase};
use t2var::numerics::Matrix;
use t2var::performance::{
    arl0, arl1, arl_table, first_to_signal, misdesign_arl0, noncentrality, simulate_run_length, write_arl_csv,
    Sampling, ScenarioGrid, ShiftSpec, SimOptions,
};
use t2var::{Error, VarModel};

use common::{data_dir, random_stationary, rng};

fn grid(name: &str) -> ScenarioGrid {
    ScenarioGrid::load(&data_dir().join(name)).unwrap()
}

fn case(id: &str) -> VarModel<f64> {
    grid("cases_I_VIII.json")
        .models::<f64>()
        .unwrap()
        .into_iter()
        .find(|(i, _)| i == id)
        .unwrap()
        .1
}

fn iid(v: usize) -> VarModel<f64> {
    VarModel::var1(vec![0.0; v], Matrix::zeros(v, v), Matrix::identity(v)).unwrap()
}

fn all_tables() -> Vec<(String, VarModel<f64>, f64)> {
    ["table1.json", "table2.json", "cases_I_VIII.json"]
        .iter()
        .flat_map(|f| {
            let g = grid(f);
            let a = g.alpha;
            g.models::<f64>().unwrap().into_iter().map(move |(id, m)| (id, m, a))
        })
        .collect()
}

#[test]
fn shifted_chart_is_never_slower_than_in_control() {
    for (id, m, alpha) in all_tables() {
        for n in [1, 3, 7, 15] {
            let d = build_design(&m, n, alpha, ChartMode::Observations, Phase::Two).unwrap();
            let a0 = arl1(&d, &m, &ShiftSpec::none(m.v())).unwrap();
            assert!((a0 - 1.0 / alpha).abs() < 1e-6 * a0, "{id}: {a0}");
            for delta in [0.1, 0.25, 0.5, 1.0, 2.0] {
                let a = arl1(&d, &m, &ShiftSpec::uniform(m.v(), delta)).unwrap();
                assert!(a <= a0, "{id} n={n} δ={delta}: {a} > {a0}");
            }
        }
    }
}

#[test]
fn arl_falls_with_shift_and_sample_size() {
    for (id, m, alpha) in all_tables() {
        let ns = [1, 2, 3, 5, 7, 10, 15, 30];
        let deltas = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];
        let cell = |n: usize, delta: f64| {
            let d = build_design(&m, n, alpha, ChartMode::Observations, Phase::Two).unwrap();
            arl1(&d, &m, &ShiftSpec::uniform(m.v(), delta)).unwrap()
        };
        for &n in &ns {
            for w in deltas.windows(2) {
                assert!(cell(n, w[1]) <= cell(n, w[0]) * (1.0 + 1e-12), "{id} n={n} δ {:?}", w);
            }
        }
        for &delta in &deltas[1..] {
            for w in ns.windows(2) {
                assert!(cell(w[1], delta) <= cell(w[0], delta) * (1.0 + 1e-12), "{id} δ={delta} n {:?}", w);
            }
        }
    }
}

#[test]
fn observation_chart_beats_residual_chart_on_the_grid() {
    let mut violations = Vec::new();
    for (id, m, alpha) in all_tables() {
        if m.phis().iter().all(|p| p.is_zero()) {
            continue;
        }
        for n in [3, 7, 15] {
            let obs = build_design(&m, n, alpha, ChartMode::Observations, Phase::Two).unwrap();
            let res = build_design(&m, n, alpha, ChartMode::Residuals, Phase::Two).unwrap();
            for delta in [0.25, 0.5, 0.75, 1.0, 1.5, 2.0] {
                let s = ShiftSpec::uniform(m.v(), delta);
                let (a, b) = (arl1(&obs, &m, &s).unwrap(), arl1(&res, &m, &s).unwrap());
                if a > b * (1.0 + 1e-9) {
                    violations.push(format!("{id} n={n} δ={delta}: {a:.3} > {b:.3}"));
                }
            }
        }
    }
    assert!(violations.is_empty(), "residual chart faster in: {violations:#?}");
}

#[test]
fn in_control_arl_is_reciprocal_alpha() {
    assert!((arl0(1.0f64 / 370.0).unwrap() - 370.0).abs() < 1e-9);
    assert!(arl0(0.0f64).is_err() && arl0(1.0f64).is_err());
    let m = case("case_IV");
    for mode in [ChartMode::Observations, ChartMode::Residuals] {
        let d = build_design(&m, 3, 0.0027, mode, Phase::Two).unwrap();
        assert!((arl1(&d, &m, &ShiftSpec::none(2)).unwrap() - 370.37).abs() < 0.5);
    }
}

#[test]
fn noncentrality_uses_process_units() {
    // Σ_ε = diag(4, 1/4), Φ = 0, n = 1: δ = (1, 1) moves the mean by (2, 1/2)
    let s = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 0.25]]).unwrap();
    let m = VarModel::var1(vec![0.0; 2], Matrix::zeros(2, 2), s).unwrap();
    assert!((noncentrality(&m, 1, &ShiftSpec::uniform(2, 1.0)).unwrap() - 2.0f64).abs() < 1e-12);
    assert!((noncentrality(&m, 4, &ShiftSpec::uniform(2, 1.0)).unwrap() - 8.0f64).abs() < 1e-12);
}

#[test]
fn simulated_run_length_matches_analytic() {
    let mut g = rng(2718);
    for k in 0..3 {
        let m = random_stationary(&mut g, 2, 1, (0.3, 0.8));
        let d = build_design(&m, 3, 1.0 / 370.0, ChartMode::Observations, Phase::Two).unwrap();
        let shift = ShiftSpec::uniform(2, 1.0);
        let want = arl1(&d, &m, &shift).unwrap();
        let r = simulate_run_length(&d, &m, &shift.apply(&m).unwrap(), &SimOptions::new(4000, k)).unwrap();
        assert!((r.mean_rl - want).abs() < 3.5 * r.std_error, "{} ± {} vs {want}", r.mean_rl, r.std_error);
        assert!(r.mean_rl >= 1.0 && r.censored_count == 0);
    }
}

#[test]
fn residual_chart_simulation_matches_analytic() {
    let m = case("case_IV");
    let d = build_design(&m, 7, 1.0 / 370.0, ChartMode::Residuals, Phase::Two).unwrap();
    let shift = ShiftSpec::uniform(2, 1.5);
    let want = arl1(&d, &m, &shift).unwrap();
    let r = simulate_run_length(&d, &m, &shift.apply(&m).unwrap(), &SimOptions::new(4000, 5)).unwrap();
    assert!((r.mean_rl - want).abs() < 3.5 * r.std_error, "{} ± {} vs {want}", r.mean_rl, r.std_error);
}

#[test]
fn first_to_signal_is_reproducible() {
    let m = case("case_IV");
    let opts = SimOptions::new(2000, 99);
    let a = first_to_signal(&m, 3, 1.0 / 370.0, &ShiftSpec::uniform(2, 1.0), &opts).unwrap();
    let b = first_to_signal(&m, 3, 1.0 / 370.0, &ShiftSpec::uniform(2, 1.0), &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n1 + a.n2 + a.n3, 2000);
    assert!((a.p1 + a.p2 + a.p3 - 1.0).abs() < 1e-12);
    let c = first_to_signal(&m, 3, 1.0 / 370.0, &ShiftSpec::uniform(2, 1.0), &SimOptions::new(2000, 100)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn big_shift_makes_both_charts_fire_at_once() {
    let r = first_to_signal(&iid(2), 15, 1.0 / 370.0, &ShiftSpec::uniform(2, 2.0), &SimOptions::new(2000, 1)).unwrap();
    assert!(r.p3 > 0.9, "{r:?}");
}

#[test]
fn correctly_designed_iid_chart_has_nominal_arl() {
    let r = misdesign_arl0(&iid(2), 1, 0.0027, &SimOptions::new(10_000, 3)).unwrap();
    let want = 1.0 / 0.0027;
    assert!((r.mean_rl - want).abs() < 3.0 * r.std_error, "{} ± {}", r.mean_rl, r.std_error);
}

#[test]
fn continuous_sampling_of_white_noise_is_geometric() {
    let m = iid(2);
    let d = build_design(&m, 2, 0.02, ChartMode::Observations, Phase::Two).unwrap();
    let opts = SimOptions {
        sampling: Sampling::Continuous,
        ..SimOptions::new(10_000, 8)
    };
    let r = simulate_run_length(&d, &m, &m, &opts).unwrap();
    assert!((r.mean_rl - 50.0).abs() < 3.0 * r.std_error, "{} ± {}", r.mean_rl, r.std_error);
}

#[test]
fn heavy_censoring_is_an_error() {
    let m = iid(2);
    let d = build_design(&m, 1, 0.001, ChartMode::Observations, Phase::Two).unwrap();
    let opts = SimOptions {
        max_cap: 5,
        ..SimOptions::new(500, 1)
    };
    assert!(matches!(
        simulate_run_length(&d, &m, &m, &opts),
        Err(Error::ExcessiveCensoring { .. })
    ));
}

#[test]
fn residual_chart_needs_enough_history() {
    let chart = case("case_IV");
    let mut g = rng(5);
    let lagged = random_stationary(&mut g, 2, 2, (0.3, 0.5));
    let d = build_design(&lagged, 3, 0.01, ChartMode::Residuals, Phase::Two).unwrap();
    assert!(simulate_run_length(&d, &lagged, &chart, &SimOptions::new(10, 1)).is_err());
}

#[test]
fn arl_table_csv() {
    let g = grid("table1.json");
    let rows = arl_table(&g).unwrap();
    assert_eq!(rows.len(), g.scenarios.len() * g.n.len() * g.delta.len());
    let mut out = Vec::new();
    write_arl_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("scenario_id,n,delta,arl\nrho00_phi0,3,0,370\n"), "{}", &text[..80]);
}

#[test]
fn designs_share_sample_size_in_head_to_head() {
    let m = iid(2);
    let a = build_design(&m, 3, 0.01, ChartMode::Observations, Phase::Two).unwrap();
    let b: ChartDesign<f64> = build_design(&m, 4, 0.01, ChartMode::Residuals, Phase::Two).unwrap();
    assert!(t2var::performance::first_to_signal_designs(&a, &b, &m, &m, &SimOptions::new(10, 1)).is_err());
}

#[test]
fn noncentrality_matches_naive_triple_product() {
    let m = VarModel::<f64>::from_json(&std::fs::read_to_string(data_dir().join("steel.json")).unwrap()).unwrap();
    let inv = t2var::numerics::inverse(&m.sigma_xbar(4).unwrap()).unwrap();
    for delta in [[0.5, 0.0, 0.0], [1.0, 1.0, 1.0], [-0.3, 2.0, 0.7]] {
        let raw: Vec<f64> = (0..3).map(|j| delta[j] * m.sigma_eps()[(j, j)].sqrt()).collect();
        let mut naive = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                naive += raw[a] * inv[(a, b)] * raw[b];
            }
        }
        let d = noncentrality(&m, 4, &ShiftSpec::new(delta.to_vec()).unwrap()).unwrap();
        assert!((d - naive).abs() < 1e-12 * naive.max(1.0), "{d} vs {naive}");
    }
}
