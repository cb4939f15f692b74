use iaq::Solver;
use iaq_wasm_demo::{distortion_curve, plan, transmit_scene, SceneParams, SIDE};

fn params(solver: Solver, mu: f64) -> SceneParams {
    SceneParams {
        rho: 0.25,
        gamma: 1.0,
        mu,
        solver,
        center: (4.0, 9.0),
        spread: 2.0,
        seed: 3,
    }
}

#[test]
fn plan_favours_the_object() {
    let p = plan(&params(Solver::WaterFillingModified, 0.02)).unwrap();
    assert_eq!(p.bits.len(), 196);
    assert!(p.rho <= 0.25);
    let object = p.bits[9 * 14 + 4];
    let corner = p.bits[13];
    assert!(object > corner, "object {object}, corner {corner}");
}

#[test]
fn every_solver_plans() {
    for solver in Solver::ALL {
        let p = plan(&params(solver, 0.01)).unwrap();
        assert_eq!(p.bits.len(), 196);
        assert!(p.objective > 0.0);
    }
}

#[test]
fn curve_starts_at_zero_bit_level_and_decreases() {
    let c = distortion_curve(0.05).unwrap();
    assert_eq!(c.len(), 9);
    assert!((c[0] - 1.0 / 0.95).abs() < 1e-12);
    assert!(c.windows(2).all(|w| w[1] < w[0]));
    let clean = distortion_curve(0.0).unwrap();
    assert!((clean[3] - 1.0 / 64.0).abs() < 1e-15);
    assert!(distortion_curve(1.5).is_err());
}

#[test]
fn transmission_returns_two_rgba_frames() {
    let (original, received) = transmit_scene(&params(Solver::Incremental, 0.0)).unwrap();
    assert_eq!(original.len(), SIDE * SIDE * 4);
    assert_eq!(received.len(), original.len());
    assert!(original.chunks(4).all(|px| px[3] == 255));
    let again = transmit_scene(&params(Solver::Incremental, 0.0)).unwrap().1;
    assert_eq!(received, again);
}
