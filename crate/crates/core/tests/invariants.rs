mod common;

use common::props::*;
use dynetforge::ModelKind;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_symmetric_with_spectrum_in_0_2(fam in family(), side in 3usize..7, seed in 0u64..1000) {
        laplacian_spectrum(fam, side, seed)?;
    }

    #[test]
    fn augmentation_appends_zero_columns(h in matrix(5, 3, -10.0, 10.0), p in 0usize..4) {
        zero_augmentation(h, p)?;
    }

    #[test]
    fn gru_output_lies_between_candidate_and_observation(
        seed in 0u64..500,
        h_pred in matrix(4, 5, -5.0, 5.0),
        h_obs in matrix(4, 3, -5.0, 5.0),
    ) {
        gru_convex_bound(seed, h_pred, h_obs)?;
    }

    #[test]
    fn norm_l1_is_mae_over_mean_abs_truth(pred in snapshots(4, 6), truth in snapshots(4, 6)) {
        norm_l1_identity(pred, truth)?;
    }

    #[test]
    fn error_over_time_averages_to_mae(pred in snapshots(5, 7), truth in snapshots(5, 7)) {
        series_mean_is_mae(pred, truth)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dataset_bytes_round_trip(fam in family(), dynk in dynamics(), regular in any::<bool>(), seed in 0u64..1000) {
        dataset_round_trip(fam, dynk, regular, seed)?;
    }

    #[test]
    fn checkpoint_bytes_round_trip(
        kind in prop::sample::select(ModelKind::ALL.to_vec()),
        epochs in 0usize..3,
        seed in 0u64..1000,
    ) {
        checkpoint_round_trip(kind, epochs, seed)?;
    }
}
