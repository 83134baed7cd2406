use std::sync::Arc;

use proptest::prelude::*;
use shiftkit::bridges::{AccToCal, AccToQuant, CalToAcc, CalToQuant, QuantToAcc, QuantToCal};
use shiftkit::calibrate::CalMethod;
use shiftkit::cap::{AtcScore, CapMethod};
use shiftkit::data::ScoredSet;
use shiftkit::method::{AccuracyPredictorFactory, CalibratorFactory, QuantifierFactory, TestView};
use shiftkit::models::{fit, Hyperparams, ModelKind};
use shiftkit::quantify::QuantMethod;
use shiftkit::synth::two_gaussians;

fn quantifiers() -> Vec<Arc<dyn QuantifierFactory>> {
    vec![
        Arc::new(QuantMethod::Pacc),
        Arc::new(QuantMethod::Emq { train_prior: None }),
        Arc::new(QuantMethod::Hdy { bins: 8 }),
        Arc::new(CalToQuant(Arc::new(CalMethod::DmCal { bins: 8 }))),
        Arc::new(AccToQuant { acc: Arc::new(CapMethod::Atc { score: AtcScore::MaxConfidence, t: 0.5 }), t: 0.5 }),
    ]
}

fn calibrators() -> Vec<Arc<dyn CalibratorFactory>> {
    vec![
        Arc::new(CalMethod::Platt),
        Arc::new(QuantToCal { quant: Arc::new(QuantMethod::Pacc), bins: 5 }),
        Arc::new(AccToCal { acc: Arc::new(CapMethod::Atc { score: AtcScore::NegativeEntropy, t: 0.5 }), bins: 6 }),
    ]
}

fn predictors() -> Vec<Arc<dyn AccuracyPredictorFactory>> {
    vec![
        Arc::new(CapMethod::Atc { score: AtcScore::MaxConfidence, t: 0.5 }),
        Arc::new(CalToAcc { cal: Arc::new(CalMethod::Platt), t: 0.5 }),
        Arc::new(QuantToAcc { quant: Arc::new(QuantMethod::Emq { train_prior: None }), t: 0.5 }),
    ]
}

/// Scores a logistic model trained on balanced data against a validation
/// set and a test set drawn at `test_prior`.
fn fixture(seed: u64, test_prior: f64) -> (ScoredSet, Vec<f64>) {
    let model = fit(ModelKind::LogisticRegression, &two_gaussians(400, 0.5, 1.0, 2, seed), &Hyperparams::default()).unwrap();
    let val = model.score(&two_gaussians(400, 0.5, 1.0, 2, seed + 1)).unwrap();
    let test = model.predict_all(&two_gaussians(250, test_prior, 1.0, 2, seed + 2)).unwrap();
    (val, test)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adapted_methods_stay_in_unit_interval(seed in 0u64..10_000, prior in 0.1f64..0.9) {
        let (val, test) = fixture(seed, prior);
        let view = TestView::whole(&test);
        for q in quantifiers() {
            let p = q.fit(&val).unwrap().quantify(view).unwrap();
            prop_assert!((0.0..=1.0).contains(&p), "prevalence {p}");
        }
        for c in calibrators() {
            let cal = c.fit(&val, view).unwrap();
            for y in cal.calibrate_all(&test) {
                prop_assert!((0.0..=1.0).contains(&y), "calibrated {y}");
            }
        }
        for a in predictors() {
            let acc = a.fit(&val).unwrap().predict(view).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc), "accuracy {acc}");
        }
    }
}

#[test]
fn adapted_quantifiers_track_the_shift_direction() {
    let (val, low) = fixture(42, 0.2);
    let (_, high) = fixture(42, 0.8);
    for q in quantifiers() {
        let fitted = q.fit(&val).unwrap();
        let a = fitted.quantify(TestView::whole(&low)).unwrap();
        let b = fitted.quantify(TestView::whole(&high)).unwrap();
        assert!(a < b, "{a} vs {b}");
    }
}
