//! Singular subspaces of the ground-truth matrix, the constraint span, and the
//! coverage metrics that relate them.

mod bounds;
mod certificate;
mod coherence;
mod constraint_space;
mod svd;
mod tangent;

pub use bounds::{
    corollary1_check, corollary2_bound, degrees_of_freedom, theorem1_bounds, BoundConstants,
    BoundInputs, Corollary1Check, Theorem1Bounds,
};
pub use certificate::{dual_certificate, CertificateReport, MAX_CONDITION, RESIDUAL_TOLERANCE};
pub use coherence::{
    coherence_report, mu_coherence, mu_q_perp, mu_q_perp_trace, nu0, nu_q_perp, scree,
    CoherenceReport, Scree,
};
pub use constraint_space::{orthonormalize_constraints, ConstraintSpaceQ, DROP_TOLERANCE};
pub use svd::{truncated_svd, RankSelection, SvdFactors, DEFAULT_RANK_TOLERANCE};
pub use tangent::{project_t, project_t_perp, SubspaceT};
