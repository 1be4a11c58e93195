//! The mathematical layers accept any scalar implementing `Real`; this
//! exercises the whole prediction pipeline at `f32` and checks it tracks
//! the `f64` reference within single-precision accuracy.

use ampalloc::{
    epsilons_for_ratio, minimax_mse, optimal_allocation, predicted_mse, soft_threshold,
    AllocationProfile, BlockProfile, ThreePointPrior,
};

#[test]
fn single_precision_tracks_double_precision() {
    let m32 = minimax_mse(0.1_f32).unwrap();
    let m64 = minimax_mse(0.1_f64).unwrap();
    assert!((f64::from(m32.m_sharp) - m64.m_sharp).abs() < 1e-4);
    assert!((f64::from(m32.alpha_star) - m64.alpha_star).abs() < 1e-2);

    let eps32 = epsilons_for_ratio(0.15_f32, 0.5, 10.0, &[0.5, 0.5]).unwrap();
    let eps64 = epsilons_for_ratio(0.15_f64, 0.5, 10.0, &[0.5, 0.5]).unwrap();
    assert!((f64::from(eps32[0]) - eps64[0]).abs() < 1e-6);

    let profile32 = BlockProfile::new(
        vec![
            (0.5_f32, ThreePointPrior::least_favorable(eps32[0]).unwrap()),
            (0.5_f32, ThreePointPrior::least_favorable(eps32[1]).unwrap()),
        ],
        0.5,
    )
    .unwrap();
    let profile64 = BlockProfile::new(
        vec![
            (0.5_f64, ThreePointPrior::least_favorable(eps64[0]).unwrap()),
            (0.5_f64, ThreePointPrior::least_favorable(eps64[1]).unwrap()),
        ],
        0.5,
    )
    .unwrap();

    let alloc32 = optimal_allocation(&profile32).unwrap();
    let alloc64 = optimal_allocation(&profile64).unwrap();
    assert!((f64::from(alloc32.sigma2()[0]) - alloc64.sigma2()[0]).abs() < 1e-4);

    let p32 = predicted_mse(&profile32, &alloc32, 0.2).unwrap();
    let p64 = predicted_mse(&profile64, &alloc64, 0.2).unwrap();
    assert!(p32.converges && p64.converges);
    let rel = (f64::from(p32.mse.unwrap()) - p64.mse.unwrap()).abs() / p64.mse.unwrap();
    assert!(rel < 1e-3, "relative gap {rel}");
}

#[test]
fn uniform_allocation_is_generic_too() {
    let alloc = AllocationProfile::<f32>::uniform(2);
    assert_eq!(alloc.sigma2(), &[1.0_f32, 1.0]);
    assert_eq!(soft_threshold(1.5_f32, 1.0), 0.5);
    assert_eq!(soft_threshold(-1.5_f32, 1.0), -0.5);
}
