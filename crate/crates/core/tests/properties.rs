use iaq::allocation::{
    adjust_by_marginal_gain, adjust_to_budget, allocate, allocate_incremental, solve_continuous,
    solve_continuous_modified, BaselineParams, Solver, SolverConfig,
};
use iaq::bitstream::{dequantize_image, quantize_image, Bitstream};
use iaq::distortion::DistortionParams;
use iaq::model::{side_info_bits, BitAllocation, Budget, ImageTensor, ImportanceMap, PatchPartition};
use iaq::weighting::{weight_vector, WeightParams};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, u64, usize)> {
    (2usize..40, 1usize..4, 0.0f64..1.0).prop_flat_map(|(n, ppp_pick, frac)| {
        let ppp = [1, 4, 16, 256][ppp_pick];
        (prop::collection::vec(1e-6f64..1.0, n), Just(frac), Just(ppp)).prop_map(move |(w, frac, ppp)| {
            let full = (w.len() * ppp * 8) as u64;
            let extra = 1 + ((full - 2) as f64 * frac) as u64;
            (w, extra, ppp)
        })
    })
}

fn budget_of(n: usize, extra: u64, ppp: usize) -> Budget {
    Budget::new(side_info_bits(n, 8) + extra, 8, n, ppp).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_budgeted_solver_fits((w, extra, ppp) in instance(), mu in 0.0f64..0.2) {
        let b = budget_of(w.len(), extra, ppp);
        let p = DistortionParams::new(ppp, 255.0, mu).unwrap();
        for solver in [Solver::Incremental, Solver::WaterFilling, Solver::IncrementalModified, Solver::WaterFillingModified, Solver::FixedQ] {
            let a = allocate(solver, &w, &w, &b, &p, &SolverConfig::default(), &BaselineParams::default()).unwrap();
            prop_assert!(a.fits(&b), "{solver} over budget");
        }
    }

    #[test]
    fn adjustments_leave_less_than_one_increment((w, extra, ppp) in instance(), seed in prop::collection::vec(0u8..=8, 40)) {
        let b = budget_of(w.len(), extra, ppp);
        let p = DistortionParams::new(ppp, 1.0, 0.05).unwrap();
        let rounded = &seed[..w.len()];
        for a in [adjust_to_budget(rounded, &w, &b).unwrap(), adjust_by_marginal_gain(rounded, &w, &b, &p).unwrap()] {
            prop_assert!(a.fits(&b));
            let saturated = a.bits.iter().all(|&m| m == 8);
            prop_assert!(saturated || b.payload_capacity() - a.payload_bits() < ppp as u64);
        }
    }

    #[test]
    fn continuous_levels_follow_weights((w, extra, ppp) in instance(), mu in prop::sample::select(vec![0.0, 0.01, 0.1, 0.2])) {
        let b = budget_of(w.len(), extra, ppp);
        let p = DistortionParams::new(ppp, 255.0, mu).unwrap();
        let sol = if mu == 0.0 {
            solve_continuous(&w, &b, &p).unwrap()
        } else {
            let cfg = SolverConfig { max_bisections: 60, ..SolverConfig::default() };
            solve_continuous_modified(&w, &b, &p, &cfg).unwrap()
        };
        for i in 0..w.len() {
            for j in 0..w.len() {
                if w[i] > w[j] && sol.level_converged[i] && sol.level_converged[j] {
                    prop_assert!(sol.levels[i] >= sol.levels[j] * (1.0 - 1e-4));
                }
            }
        }
    }

    #[test]
    fn incremental_never_loses_to_uniform((w, extra, ppp) in instance(), mu in 0.0f64..0.2) {
        let b = budget_of(w.len(), extra, ppp);
        let p = DistortionParams::new(ppp, 255.0, mu).unwrap();
        let ia = allocate_incremental(&w, &b, &p).unwrap();
        let m = iaq::allocation::largest_uniform_depth(&b);
        let uniform = BitAllocation::uniform(w.len(), m, ppp);
        prop_assert!(iaq::allocation::objective(&ia.bits, &w, &p) <= iaq::allocation::objective(&uniform.bits, &w, &p));
    }

    #[test]
    fn weights_preserve_score_order(scores in prop::collection::vec(0.0f64..1.0, 2..50), gamma in 0.2f64..3.0) {
        prop_assume!(scores.iter().sum::<f64>() > 0.0);
        let map = ImportanceMap::from_scores(scores).unwrap();
        let w = weight_vector(&map, &WeightParams::with_gamma(gamma).unwrap());
        let a = map.scores();
        for i in 0..a.len() {
            prop_assert!(w[i] > 0.0 && w[i] <= 1.0);
            for j in 0..a.len() {
                if a[i] > a[j] {
                    prop_assert!(w[i] >= w[j]);
                }
            }
        }
    }

    #[test]
    fn container_round_trip(rows in 1usize..4, cols in 1usize..4, c in prop::sample::select(vec![1usize, 3]), depth_seed in prop::collection::vec(0u8..=8, 16), px_seed in any::<u64>()) {
        let (h, w) = (rows * 8, cols * 8);
        let mut state = px_seed | 1;
        let px: Vec<f32> = (0..h * w * c)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 256) as f32
            })
            .collect();
        let image = ImageTensor::new(h, w, c, px).unwrap();
        let partition = PatchPartition::of(&image, 8).unwrap();
        let bits = depth_seed[..partition.n_patches()].to_vec();
        let alloc = BitAllocation::new(bits, partition.pixels_per_patch());
        let stream = quantize_image(&image, &alloc, &partition, 8).unwrap();
        let bytes = stream.to_bytes().unwrap();
        let back = Bitstream::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &stream);
        prop_assert_eq!(dequantize_image(&back).unwrap(), dequantize_image(&stream).unwrap());
        prop_assert!(Bitstream::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
