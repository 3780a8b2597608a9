use std::f64::consts::PI;

use proptest::prelude::*;
use ssr_telescopy::estimation::{sample_outcomes, two_setting_plan};
use ssr_telescopy::qfi::{optimal_qfi, prop1_ratio, qfi_ratio_end_to_end};
use ssr_telescopy::teleport::{
    fisher_information, optimal_fi, sector_states, simulate_pipeline, MeasurementSetting,
};
use ssr_telescopy::{AncillaKind, AncillaSpec, ModeLayout, QfiMethod, SectorState, SourceParams, C64};

fn diagonal() -> impl Strategy<Value = Vec<C64>> {
    (1usize..=4).prop_flat_map(|n| {
        proptest::collection::vec((0.05f64..1.0, 0.0..2.0 * PI), n + 1).prop_map(|v| {
            let norm: f64 = v.iter().map(|(r, _)| r * r).sum::<f64>().sqrt();
            v.into_iter().map(|(r, a)| C64::from_polar(r / norm, a)).collect()
        })
    })
}

fn source() -> impl Strategy<Value = SourceParams> {
    (0.05f64..0.95, 0.0..2.0 * PI).prop_map(|(g, t)| SourceParams::new(1e-3, g, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulated_sectors_match_closed_form(f in diagonal(), p in source()) {
        let sim = simulate_pipeline(&f, &p).unwrap();
        let closed = sector_states(&f, &p).unwrap();
        let total: f64 = sim.sectors.iter().map(SectorState::weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (a, b) in sim.sectors.iter().zip(&closed) {
            prop_assert!((a.weight() - b.weight()).abs() < 1e-12);
            if let (SectorState::Success(x), SectorState::Success(y)) = (a, b) {
                for i in 0..2 {
                    for j in 0..2 {
                        prop_assert!((x.matrix[i][j] - y.matrix[i][j]).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn teleport_saturates_and_bounds_fi(
        f in diagonal(),
        p in source(),
        angles in proptest::collection::vec((0.0..PI, 0.0..2.0 * PI), 6),
    ) {
        let spec = AncillaSpec::from_diagonal(AncillaKind::Custom, &f, ModeLayout::OnePhotonPerMode).unwrap();
        let h = prop1_ratio(&spec.weights());
        let best = optimal_fi(&f, &p).unwrap();
        prop_assert!((best.ratio_gmod.unwrap() - h).abs() < 1e-9);
        prop_assert!((best.ratio_theta.unwrap() - h).abs() < 1e-9);
        // Arbitrary settings never beat the optimum.
        let sectors = sector_states(&f, &p).unwrap();
        let settings: Vec<_> = sectors
            .iter()
            .zip(angles.iter().cycle())
            .map(|(s, &(a, d))| match s {
                SectorState::Success(_) => Some(MeasurementSetting::new(a, d).unwrap()),
                SectorState::Failure { .. } => None,
            })
            .collect();
        let r = fisher_information(&sectors, &p, &settings).unwrap();
        prop_assert!(r.f_gmod <= best.f_gmod * (1.0 + 1e-9));
        prop_assert!(r.f_theta <= best.f_theta * (1.0 + 1e-9));
        let opt = optimal_qfi(&p);
        prop_assert!(best.f_theta <= opt.h_theta * (1.0 + 1e-9));
    }

    #[test]
    fn layouts_give_the_same_ratio(f in diagonal(), p in source()) {
        let mut ratios = Vec::new();
        for layout in [ModeLayout::SingleModePair, ModeLayout::OnePhotonPerMode, ModeLayout::PermutedSuperposition] {
            let spec = AncillaSpec::from_diagonal(AncillaKind::Custom, &f, layout).unwrap();
            ratios.push(qfi_ratio_end_to_end(&spec, &SourceParams { epsilon: 1e-4, ..p }, QfiMethod::SldBlock).unwrap().ratio);
        }
        prop_assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-8), "{:?}", ratios);
    }

    #[test]
    fn sampling_is_seed_deterministic(f in diagonal(), p in source(), seed in any::<u64>()) {
        let [a, _] = two_setting_plan(&f, &p).unwrap();
        let p = SourceParams { epsilon: 1e-2, ..p };
        let x = sample_outcomes(&f, &p, &a, 50_000, seed).unwrap();
        let y = sample_outcomes(&f, &p, &a, 50_000, seed).unwrap();
        prop_assert_eq!(&x, &y);
        prop_assert_eq!(x.detected() + x.no_detection, 50_000);
    }
}
