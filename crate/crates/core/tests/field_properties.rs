mod common;

use nalgebra::Vector3;
use nvscan_core::field::{monopole_vortex_field, pearl_vortex_field, total_field};
use proptest::prelude::*;

use common::{pearl_flux, scene, FLUX_QUANTUM};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flux_is_one_quantum_within_2_percent(z in 50e-9f64..1e-6, lambda in 0.0f64..5e-6) {
        let r = 200.0 * z.max(lambda);
        let flux = pearl_flux(z, lambda, r, 400);
        prop_assert!((flux / FLUX_QUANTUM - 1.0).abs() < 0.02, "flux ratio {}", flux / FLUX_QUANTUM);
    }

    #[test]
    fn monopole_at_depth_lambda_converges_for_large_standoff(
        lambda in 1e-9f64..50e-9,
        ratio in 10.0f64..40.0,
        rho_scale in 0.0f64..20.0,
    ) {
        let z = ratio * lambda;
        let rho = rho_scale * z;
        let (pr, pz) = pearl_vortex_field(rho, z, lambda).unwrap();
        let (mr, mz) = monopole_vortex_field(rho, z, lambda);
        let err = (pr - mr).hypot(pz - mz) / pr.hypot(pz);
        prop_assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn single_centered_vortex_is_axisymmetric(rho in 0.0f64..3e-6, phi in 0.0f64..std::f64::consts::TAU) {
        let cfg = scene(0.35, &[(0.0, 0.0)]);
        let z = 110e-9;
        let a = total_field(&Vector3::new(rho, 0.0, z), &cfg).unwrap().b;
        let b = total_field(&Vector3::new(rho * phi.cos(), rho * phi.sin(), z), &cfg).unwrap().b;
        let radial_b = b.x * phi.cos() + b.y * phi.sin();
        let tangential_b = -b.x * phi.sin() + b.y * phi.cos();
        let scale = a.norm();
        prop_assert!((a.x - radial_b).abs() <= 1e-12 * scale);
        prop_assert!(tangential_b.abs() <= 1e-12 * scale);
        prop_assert!((a.z - b.z).abs() <= 1e-12 * scale);
    }

    #[test]
    fn superposition_of_two_vortices(x in -2e-6f64..2e-6, y in -2e-6f64..2e-6) {
        let v1 = (-0.8e-6, 0.3e-6);
        let v2 = (0.9e-6, -0.5e-6);
        let p = Vector3::new(x, y, 110e-9);
        let both = total_field(&p, &scene(0.35, &[v1, v2])).unwrap().b;
        let one = total_field(&p, &scene(0.35, &[v1])).unwrap().b;
        let two = total_field(&p, &scene(0.35, &[v2])).unwrap().b;
        let none = total_field(&p, &scene(0.35, &[])).unwrap().b;
        let sum = one + two - none;
        prop_assert!((both - sum).norm() <= 4.0 * f64::EPSILON * both.norm());
    }

    #[test]
    fn normal_state_is_the_bias_bit_for_bit(x in -4e-6f64..4e-6, y in -4e-6f64..4e-6, t in 1.25f64..5.0) {
        let cfg = scene(t, &[(0.0, 0.0), (1e-6, 1e-6)]);
        let b = total_field(&Vector3::new(x, y, 110e-9), &cfg).unwrap().b;
        prop_assert_eq!(b, Vector3::new(0.0, 0.0, cfg.bias_bz));
    }
}

#[test]
fn bias_above_upper_critical_field_is_normal() {
    let mut cfg = scene(0.69, &[(0.0, 0.0)]);
    cfg.bias_bz = 6e-3;
    let b = total_field(&Vector3::new(0.1e-6, 0.0, 110e-9), &cfg).unwrap().b;
    assert_eq!(b, Vector3::new(0.0, 0.0, 6e-3));
}
