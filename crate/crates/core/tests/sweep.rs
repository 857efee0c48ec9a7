use std::fs;

use hulthen_fss::analytic::{energy_level, HulthenParams};
use hulthen_fss::config::RunConfig;
use hulthen_fss::fss::{delta_e, delta_v, gamma_alpha, Triple};
use hulthen_fss::sweep::{load_surface, run_sweep, save_surface, EnergySurface, SolverOptions, Status, SweepConfig};
use hulthen_fss::Error;
use tempfile::TempDir;

fn options() -> SolverOptions {
    RunConfig::default().numerics.solver_options()
}

fn sweep(lo: f64, hi: f64, steps: usize, n_list: Vec<usize>) -> EnergySurface {
    let cfg = SweepConfig {
        lambda_min: lo,
        lambda_max: hi,
        lambda_steps: steps,
        n_list,
        ..SweepConfig::default()
    };
    run_sweep(&cfg, &options()).unwrap()
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

#[test]
fn golden_deltas_at_052() {
    // Oracle: the same pencil solved in 34-digit arithmetic.
    let s = sweep(0.52, 0.53, 2, vec![32, 34, 36]);
    let t = Triple::new(32, 34, 36).unwrap();
    let de = delta_e(&s, 0.52, &t).unwrap();
    let dv = delta_v(&s, 0.52, &t).unwrap();
    let g = gamma_alpha(&s, 0.52, &t).unwrap();
    assert!(close(de, 24.031919681140459, 1e-8), "{de}");
    assert!(close(dv, -61.398675040580485, 1e-8), "{dv}");
    assert!(close(g, 0.28130343420201291, 1e-8), "{g}");

    let e32 = s.get(0.52, 32).unwrap();
    assert!(close(e32.e0.unwrap(), -2.0000012922804707e-4, 1e-14));
    assert!(close(e32.v.unwrap(), -1.0399775668356847e-2, 1e-13));
}

#[test]
fn bound_rows_have_negative_energy_and_potential() {
    let s = sweep(0.55, 3.0, 25, vec![16, 24]);
    assert_eq!(s.rows.len(), 50);
    for r in &s.rows {
        assert_eq!(r.status, Status::Bound, "{r:?}");
        assert!(r.e0.unwrap() < 0.0 && r.v.unwrap() < 0.0, "{r:?}");
        // The kinetic term is positive, so V lies below E.
        assert!(r.v.unwrap() < r.e0.unwrap(), "{r:?}");
    }
}

#[test]
fn larger_basis_tracks_the_exact_level_better() {
    // Errors oscillate with N, so only a wide gap in N is compared.
    let s = sweep(0.55, 1.5, 20, vec![16, 48]);
    let worst = |n: usize| {
        s.series(n)
            .lambda
            .iter()
            .zip(&s.series(n).e0)
            .map(|(&l, &e)| {
                let exact = energy_level(&HulthenParams::new(l, 1.0, 1)).unwrap();
                ((e - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(16), worst(48));
    assert!(fine < 1e-8, "{fine}");
    assert!(fine < coarse / 100.0, "{coarse} vs {fine}");
}

#[test]
fn rows_below_threshold_stay_unbound() {
    let s = sweep(0.3, 0.45, 4, vec![24]);
    for r in &s.rows {
        assert_eq!(r.status, Status::Unbound, "{r:?}");
        assert!(r.e0.unwrap() >= 0.0);
    }
}

#[test]
fn surface_round_trips_through_csv() {
    let dir = TempDir::new().unwrap();
    let s = sweep(0.5, 0.6, 5, vec![8, 10]);
    let path = dir.path().join("nested").join("surface.csv");
    save_surface(&s, &path, "# test").unwrap();
    let back = load_surface(&path).unwrap();
    assert_eq!(back, s);
}

#[test]
fn non_finite_cell_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("surface.csv");
    fs::write(
        &path,
        "lambda,n_basis,E0,V,residual,status\n# meta\n0.5,8,-1e-3,-2e-3,1e-20,bound\n0.6,8,NaN,-2e-3,1e-20,bound\n",
    )
    .unwrap();
    match load_surface(&path) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("E0"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}
