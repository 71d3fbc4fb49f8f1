//! Frame-level ranking metrics and region/track localization criteria.

mod frame;
mod region;
mod report;

pub use frame::{ap, auroc, pr_curve, roc_curve, CurvePoint, FrameEval};
pub use region::{rbdc, rbdc_curve, tbdc, tbdc_curve, Detection, DetectionCurve, GtRegion, RegionEval};
pub use report::{Metric, MetricsReport, DEFAULT_ALPHA, DEFAULT_BETA};
