//! Method names accepted in experiment configs.
//!
//! Base methods per task, plus adaptations named `<Base>-<bridge>` where
//! `<Base>` is a base method of the source task:
//!
//! | task | base | adapted |
//! |------|------|---------|
//! | quantification | CC, PCC, ACC, PACC, EMQ, HDy, KDEy | `<Cal>-cal2quant`, `<Cap>-acc2quant` |
//! | calibration | Uncalibrated, Platt, PacCal, DMCal, EMQ | `<Quant>-quant2cal`, `<Cap>-acc2cal` |
//! | accuracy | Naive, ATC, ATC-NE, DoC | `<Quant>-quant2acc`, `<Cal>-cal2acc` |

use std::sync::Arc;

use shiftkit::bridges::{AccToCal, AccToQuant, BridgeConfig, CalToAcc, CalToQuant, QuantToAcc, QuantToCal};
use shiftkit::calibrate::{CalMethod, DMCAL_BINS};
use shiftkit::cap::{AtcScore, CapMethod};
use shiftkit::eval::{ProtocolKind, SampleProtocol};
use shiftkit::method::{AccuracyPredictorFactory, CalibratorFactory, QuantifierFactory};
use shiftkit::models::DEFAULT_THRESHOLD;
use shiftkit::quantify::{QuantMethod, HDY_BINS, KDEY_BANDWIDTH};

use crate::config::{ShiftKind, Task};

const QUANT: [&str; 7] = ["CC", "PCC", "ACC", "PACC", "EMQ", "HDy", "KDEy"];
const CAL: [&str; 5] = ["Uncalibrated", "Platt", "PacCal", "DMCal", "EMQ"];
const CAP: [&str; 4] = ["Naive", "ATC", "ATC-NE", "DoC"];

/// DoC draws its validation samples with a seed offset from the run seed.
const DOC_SEED_OFFSET: u64 = 0x646f63;

pub enum Method {
    Quant(Arc<dyn QuantifierFactory>),
    Cal(Arc<dyn CalibratorFactory>),
    Acc(Arc<dyn AccuracyPredictorFactory>),
}

pub struct Registry {
    t: f64,
    bridges: BridgeConfig,
    doc_protocol: SampleProtocol,
}

impl Registry {
    pub fn new(shift: ShiftKind, seed: u64) -> Self {
        let kind = match shift {
            ShiftKind::Label => ProtocolKind::App,
            ShiftKind::Covariate => ProtocolKind::UniformRandom,
        };
        Self {
            t: DEFAULT_THRESHOLD,
            bridges: BridgeConfig::default(),
            doc_protocol: SampleProtocol::new(kind, seed.wrapping_add(DOC_SEED_OFFSET)),
        }
    }

    pub fn names(&self, task: Task) -> Vec<String> {
        let adapted = |bases: &[&str], suffix: &str| bases.iter().map(move |b| format!("{b}-{suffix}")).collect::<Vec<_>>();
        let (base, a, b): (&[&str], Vec<String>, Vec<String>) = match task {
            Task::Quantification => (&QUANT, adapted(&CAL, "cal2quant"), adapted(&CAP, "acc2quant")),
            Task::Calibration => (&CAL, adapted(&QUANT, "quant2cal"), adapted(&CAP, "acc2cal")),
            Task::Accuracy => (&CAP, adapted(&QUANT, "quant2acc"), adapted(&CAL, "cal2acc")),
        };
        base.iter().map(|s| s.to_string()).chain(a).chain(b).collect()
    }

    pub fn contains(&self, task: Task, name: &str) -> bool {
        self.method(task, name).is_some()
    }

    fn quant(&self, name: &str) -> Option<Arc<dyn QuantifierFactory>> {
        let t = self.t;
        let m = match name {
            "CC" => QuantMethod::Cc { t },
            "PCC" => QuantMethod::Pcc,
            "ACC" => QuantMethod::Acc { t },
            "PACC" => QuantMethod::Pacc,
            "EMQ" => QuantMethod::Emq { train_prior: None },
            "HDy" => QuantMethod::Hdy { bins: HDY_BINS },
            "KDEy" => QuantMethod::Kdey { bandwidth: KDEY_BANDWIDTH },
            _ => return None,
        };
        Some(Arc::new(m))
    }

    fn cal(&self, name: &str) -> Option<Arc<dyn CalibratorFactory>> {
        let m = match name {
            "Uncalibrated" => CalMethod::Uncalibrated,
            "Platt" => CalMethod::Platt,
            "PacCal" => CalMethod::PacCal,
            "DMCal" => CalMethod::DmCal { bins: DMCAL_BINS },
            "EMQ" => CalMethod::Emq { train_prior: None },
            _ => return None,
        };
        Some(Arc::new(m))
    }

    fn cap(&self, name: &str) -> Option<Arc<dyn AccuracyPredictorFactory>> {
        let t = self.t;
        let m = match name {
            "Naive" => CapMethod::Naive { t },
            "ATC" => CapMethod::Atc { score: AtcScore::MaxConfidence, t },
            "ATC-NE" => CapMethod::Atc { score: AtcScore::NegativeEntropy, t },
            "DoC" => CapMethod::Doc { protocol: self.doc_protocol, t },
            _ => return None,
        };
        Some(Arc::new(m))
    }

    pub fn method(&self, task: Task, name: &str) -> Option<Method> {
        let (t, b) = (self.t, self.bridges);
        let (base, bridge) = match name.rsplit_once('-') {
            Some((base, bridge)) if bridge.contains('2') => (base, Some(bridge)),
            _ => (name, None),
        };
        Some(match (task, bridge) {
            (Task::Quantification, None) => Method::Quant(self.quant(base)?),
            (Task::Quantification, Some("cal2quant")) => Method::Quant(Arc::new(CalToQuant(self.cal(base)?))),
            (Task::Quantification, Some("acc2quant")) => Method::Quant(Arc::new(AccToQuant { acc: self.cap(base)?, t })),
            (Task::Calibration, None) => Method::Cal(self.cal(base)?),
            (Task::Calibration, Some("quant2cal")) => {
                Method::Cal(Arc::new(QuantToCal { quant: self.quant(base)?, bins: b.bins_quant_to_cal }))
            }
            (Task::Calibration, Some("acc2cal")) => {
                Method::Cal(Arc::new(AccToCal { acc: self.cap(base)?, bins: b.bins_acc_to_cal }))
            }
            (Task::Accuracy, None) => Method::Acc(self.cap(base)?),
            (Task::Accuracy, Some("quant2acc")) => Method::Acc(Arc::new(QuantToAcc { quant: self.quant(base)?, t })),
            (Task::Accuracy, Some("cal2acc")) => Method::Acc(Arc::new(CalToAcc { cal: self.cal(base)?, t })),
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_name_resolves() {
        let r = Registry::new(ShiftKind::Label, 0);
        for task in [Task::Quantification, Task::Calibration, Task::Accuracy] {
            for name in r.names(task) {
                assert!(r.contains(task, &name), "{name}");
            }
        }
        assert_eq!(r.names(Task::Quantification).len(), 7 + 5 + 4);
    }

    #[test]
    fn rejects_wrong_task_and_unknown_names() {
        let r = Registry::new(ShiftKind::Label, 0);
        assert!(!r.contains(Task::Calibration, "CC"));
        assert!(!r.contains(Task::Quantification, "CC-quant2cal"));
        assert!(!r.contains(Task::Accuracy, "FOO"));
        assert!(r.contains(Task::Accuracy, "ATC-NE"));
    }
}
