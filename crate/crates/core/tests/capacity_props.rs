mod common;

use proptest::prelude::*;
use sumcap_core::capacity::{
    bd_affine, bd_sum_capacity, dpc_affine, dpc_sum_capacity, loss_dpc_bd, loss_dpc_zf, zf_affine,
    zf_sum_capacity,
};
use sumcap_core::channel::db_to_linear;
use sumcap_core::linalg::cmatrix_real;
use sumcap_core::precoding::{bd_precoder, zf_precoder};
use sumcap_core::CMatrix;

use common::{gaussian_matrix, log2_det_eig, rng, split_blocks};

fn channel(seed: u64, rows: usize, m: usize) -> CMatrix {
    gaussian_matrix(rows, m, &mut rng(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ordering_dpc_bd_zf(seed in any::<u64>(), snr in -10.0f64..40.0) {
        let (m, l, n) = (16, 4, 2);
        let h = channel(seed, l * n, m);
        let rho = db_to_linear(snr);
        let zf = zf_precoder(&h, n).unwrap();
        let bd = bd_precoder(&split_blocks(&h, n)).unwrap();
        let c_dpc = dpc_sum_capacity(&h, n, rho).unwrap();
        let c_bd = bd_sum_capacity(&bd, rho).unwrap();
        let c_zf = zf_sum_capacity(&zf, rho).unwrap();
        prop_assert!(c_dpc >= c_bd - 1e-9, "dpc {} < bd {}", c_dpc, c_bd);
        prop_assert!(c_bd >= c_zf - 1e-9, "bd {} < zf {}", c_bd, c_zf);
    }

    #[test]
    fn dpc_sandwich(seed in any::<u64>()) {
        let h = channel(seed, 2, 8);
        let rho = 100.0;
        let c = dpc_sum_capacity(&h, 1, rho).unwrap();
        let zf = zf_sum_capacity(&zf_precoder(&h, 1).unwrap(), rho).unwrap();
        let bd = bd_sum_capacity(&bd_precoder(&split_blocks(&h, 1)).unwrap(), rho).unwrap();
        let upper = log2_det_eig(&(CMatrix::identity(2, 2) + &h * h.adjoint() * sumcap_core::Complex64::from(rho)));
        prop_assert!(c >= zf - 1e-9 && c >= bd - 1e-9);
        prop_assert!(c <= upper + 1e-9);
    }

    #[test]
    fn losses_are_nonnegative_and_ordered(seed in any::<u64>()) {
        let h = channel(seed, 8, 16);
        let zf = zf_precoder(&h, 2).unwrap();
        let bd = bd_precoder(&split_blocks(&h, 2)).unwrap();
        let lz = loss_dpc_zf(&h, &zf).unwrap();
        let lb = loss_dpc_bd(&h, &bd).unwrap();
        prop_assert!(lb >= -1e-9);
        prop_assert!(lb <= lz + 1e-9);
    }

    #[test]
    fn affine_gap_shrinks_with_snr(seed in any::<u64>()) {
        let (m, l, n) = (8, 2, 2);
        let h = channel(seed, l * n, m);
        let zf = zf_precoder(&h, n).unwrap();
        let bd = bd_precoder(&split_blocks(&h, n)).unwrap();
        let mut prev = [f64::INFINITY; 3];
        for snr in [10.0, 20.0, 30.0, 40.0, 60.0] {
            let rho = db_to_linear(snr);
            let gaps = [
                dpc_sum_capacity(&h, n, rho).unwrap() - dpc_affine(&h, rho).unwrap(),
                zf_sum_capacity(&zf, rho).unwrap() - zf_affine(&zf, rho).unwrap(),
                bd_sum_capacity(&bd, rho).unwrap() - bd_affine(&bd, rho).unwrap(),
            ];
            for k in 0..3 {
                prop_assert!(gaps[k] < prev[k] + 1e-7, "scheme {} at {} dB: {} after {}", k, snr, gaps[k], prev[k]);
            }
            prev = gaps;
        }
    }
}

#[test]
fn losses_match_high_snr_differences() {
    for seed in 0..20 {
        let h = channel(seed, 8, 16);
        let rho = 1e6;
        let zf = zf_precoder(&h, 2).unwrap();
        let bd = bd_precoder(&split_blocks(&h, 2)).unwrap();
        let c_dpc = dpc_sum_capacity(&h, 2, rho).unwrap();
        let dz = c_dpc - zf_sum_capacity(&zf, rho).unwrap();
        let db = c_dpc - bd_sum_capacity(&bd, rho).unwrap();
        assert!((dz - loss_dpc_zf(&h, &zf).unwrap()).abs() < 0.02, "seed {seed}");
        assert!((db - loss_dpc_bd(&h, &bd).unwrap()).abs() < 0.02, "seed {seed}");
    }
}

#[test]
fn dpc_affine_converges_absolutely() {
    for seed in 0..10 {
        let h = channel(seed + 40, 4, 8);
        let gap = |rho: f64| (dpc_sum_capacity(&h, 1, rho).unwrap() - dpc_affine(&h, rho).unwrap()).abs();
        assert!(gap(1e6) < gap(1e3));
    }
}

#[test]
fn multiplexing_gain() {
    let h = channel(5, 4, 8);
    let mut prev = 0.0;
    let mut slopes = Vec::new();
    for snr in [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0] {
        let c = dpc_sum_capacity(&h, 1, db_to_linear(snr)).unwrap();
        if snr > 0.0 {
            assert!(c > prev);
            slopes.push(c - prev);
        }
        prev = c;
    }
    // 10 dB adds LN·log2(10) bits at high SNR
    let want = 4.0 * 10f64.log2();
    assert!((slopes.last().unwrap() - want).abs() < 1e-3);
    assert!(slopes.windows(2).all(|w| (w[1] - want).abs() <= (w[0] - want).abs() + 1e-9));
}

#[test]
fn zf_hand_example_high_snr() {
    let h = cmatrix_real(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    let zf = zf_precoder(&h, 1).unwrap();
    let rho = 1e4;
    assert!(zf_sum_capacity(&zf, rho).unwrap() - zf_affine(&zf, rho).unwrap() < 0.01);
    assert!((loss_dpc_zf(&h, &zf).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn block_diagonal_bd_has_no_loss() {
    let mut r = rng(9);
    let a = gaussian_matrix(2, 3, &mut r);
    let b = gaussian_matrix(2, 3, &mut r);
    let mut h = CMatrix::zeros(4, 6);
    h.view_mut((0, 0), (2, 3)).copy_from(&a);
    h.view_mut((2, 3), (2, 3)).copy_from(&b);
    let bd = bd_precoder(&split_blocks(&h, 2)).unwrap();
    assert!(loss_dpc_bd(&h, &bd).unwrap().abs() < 1e-10);
}

#[test]
fn single_user_dpc_is_point_to_point() {
    let h = channel(3, 3, 5);
    let rho = 7.0;
    let eig: Vec<f64> = nalgebra::SymmetricEigen::new(&h * h.adjoint()).eigenvalues.iter().copied().collect();
    let want = sumcap_core::capacity::parallel_capacity(&eig, rho).unwrap();
    assert!((dpc_sum_capacity(&h, 3, rho).unwrap() - want).abs() < 1e-6);
}
