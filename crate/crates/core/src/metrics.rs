//! Centroids, displacements, within-session distances and rankings in the latent plane.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionId, SessionId};
use crate::preprocess::LatentPoint;
use crate::{Error, Result};

/// Default tie tolerance in latent units.
pub const DEFAULT_TIE_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub condition: ConditionId,
    pub session: SessionId,
    pub pc1: f64,
    pub pc2: f64,
    pub n: usize,
}

impl Centroid {
    pub fn coords(&self) -> [f64; 2] {
        [self.pc1, self.pc2]
    }
}

/// Per-condition displacement summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementRecord {
    pub condition: ConditionId,
    pub d_obs: f64,
    pub d_pred: Option<f64>,
    pub e_centroid: Option<f64>,
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Mean of a point cloud that is already filtered to one cell.
pub(crate) fn mean_point<'a, I>(points: I) -> Option<([f64; 2], usize)>
where
    I: IntoIterator<Item = &'a [f64; 2]>,
{
    let mut sum = [0.0, 0.0];
    let mut n = 0usize;
    for p in points {
        sum[0] += p[0];
        sum[1] += p[1];
        n += 1;
    }
    (n > 0).then(|| ([sum[0] / n as f64, sum[1] / n as f64], n))
}

/// Component-wise mean of the points belonging to `(condition, session)`.
pub fn centroid(points: &[LatentPoint], condition: ConditionId, session: SessionId) -> Result<Centroid> {
    let coords: Vec<[f64; 2]> = points
        .iter()
        .filter(|p| p.condition == condition && p.session == session)
        .map(LatentPoint::coords)
        .collect();
    let ([pc1, pc2], n) = mean_point(&coords).ok_or(Error::NoObservations { condition, session })?;
    Ok(Centroid { condition, session, pc1, pc2, n })
}

/// Euclidean distance between the two session centroids of one condition.
///
/// Argument order does not matter, but the sessions must differ.
pub fn observed_displacement(m1: &Centroid, m2: &Centroid) -> Result<f64> {
    if m1.condition != m2.condition {
        return Err(Error::ConditionMismatch { expected: m1.condition, found: m2.condition });
    }
    if m1.session == m2.session {
        let expected = match m1.session {
            SessionId::M1 => SessionId::M2,
            SessionId::M2 => SessionId::M1,
        };
        return Err(Error::SessionMismatch { expected, found: m2.session });
    }
    Ok(distance(m1.coords(), m2.coords()))
}

/// Distance between a predicted and an observed second-session centroid.
pub fn centroid_error(pred: &Centroid, obs: &Centroid) -> Result<f64> {
    if pred.condition != obs.condition {
        return Err(Error::ConditionMismatch { expected: obs.condition, found: pred.condition });
    }
    for c in [pred, obs] {
        if c.session != SessionId::M2 {
            return Err(Error::SessionMismatch { expected: SessionId::M2, found: c.session });
        }
    }
    Ok(distance(pred.coords(), obs.coords()))
}

/// Distance of every centroid in `session` to that session's ONL centroid.
///
/// Output follows canonical condition order; ONL reports exactly 0.
pub fn within_session_distances(centroids: &[Centroid], session: SessionId) -> Result<Vec<(ConditionId, f64)>> {
    let reference = centroids
        .iter()
        .find(|c| c.session == session && c.condition == ConditionId::Onl)
        .ok_or(Error::MissingReference(session))?;
    let mut out: Vec<(ConditionId, f64)> = centroids
        .iter()
        .filter(|c| c.session == session)
        .map(|c| {
            let d = if c.condition == ConditionId::Onl { 0.0 } else { distance(c.coords(), reference.coords()) };
            (c.condition, d)
        })
        .collect();
    out.sort_by_key(|(c, _)| *c);
    out.dedup_by_key(|(c, _)| *c);
    Ok(out)
}

/// Ascending ordering with tie annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ordered: Vec<(ConditionId, f64)>,
    /// Runs of neighbours whose consecutive gaps are below the tolerance
    /// (groups of one are omitted).
    pub tie_groups: Vec<BTreeSet<ConditionId>>,
}

impl Ranking {
    /// One-based ordinal rank of `condition`.
    pub fn rank_of(&self, condition: ConditionId) -> Option<usize> {
        self.ordered.iter().position(|(c, _)| *c == condition).map(|p| p + 1)
    }

    pub fn conditions(&self) -> Vec<ConditionId> {
        self.ordered.iter().map(|(c, _)| *c).collect()
    }

    fn group_of(&self, condition: ConditionId) -> Option<usize> {
        self.tie_groups.iter().position(|g| g.contains(&condition))
    }
}

/// Sorts ascending by value (exact ties broken by condition order) and
/// groups neighbours closer than `tie_tol`.
pub fn rank(values: &[(ConditionId, f64)], tie_tol: f64) -> Ranking {
    let mut ordered = values.to_vec();
    ordered.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut tie_groups = Vec::new();
    let mut current: BTreeSet<ConditionId> = BTreeSet::new();
    for (i, &(c, v)) in ordered.iter().enumerate() {
        if i > 0 && v - ordered[i - 1].1 < tie_tol {
            current.insert(c);
        } else {
            if current.len() > 1 {
                tie_groups.push(core::mem::take(&mut current));
            }
            current.clear();
            current.insert(c);
        }
    }
    if current.len() > 1 {
        tie_groups.push(current);
    }
    Ranking { ordered, tie_groups }
}

/// True iff `expected` appears in strictly increasing order in `ranking`,
/// with no two expected neighbours sharing a tie group.
pub fn hierarchy_satisfied(ranking: &Ranking, expected: &[ConditionId]) -> Result<bool> {
    let positions = expected
        .iter()
        .map(|&c| ranking.rank_of(c).ok_or(Error::UnknownCondition(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(expected.windows(2).zip(positions.windows(2)).all(|(cs, ps)| {
        let tied = matches!((ranking.group_of(cs[0]), ranking.group_of(cs[1])), (Some(a), Some(b)) if a == b);
        ps[0] < ps[1] && !tied
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use ConditionId::*;

    fn pt(pc1: f64, pc2: f64, c: ConditionId, s: SessionId) -> LatentPoint {
        LatentPoint { pc1, pc2, condition: c, session: s }
    }

    fn cen(c: ConditionId, s: SessionId, pc1: f64, pc2: f64) -> Centroid {
        Centroid { condition: c, session: s, pc1, pc2, n: 1 }
    }

    #[test]
    fn centroid_cases() {
        let pts = [pt(1.0, 1.0, Onl, SessionId::M1), pt(3.0, 3.0, Onl, SessionId::M1), pt(5.0, -2.0, Oc3, SessionId::M2)];
        let c = centroid(&pts, Onl, SessionId::M1).unwrap();
        assert_eq!((c.pc1, c.pc2, c.n), (2.0, 2.0, 2));
        let c = centroid(&pts, Oc3, SessionId::M2).unwrap();
        assert_eq!((c.pc1, c.pc2, c.n), (5.0, -2.0, 1));
        assert_eq!(
            centroid(&pts, Obl, SessionId::M1),
            Err(Error::NoObservations { condition: Obl, session: SessionId::M1 })
        );
    }

    #[test]
    fn displacement_cases() {
        let a = cen(Onl, SessionId::M1, 0.0, 0.0);
        let b = cen(Onl, SessionId::M2, 3.0, 4.0);
        assert_eq!(observed_displacement(&a, &b).unwrap(), 5.0);
        assert_eq!(observed_displacement(&b, &a).unwrap(), 5.0);
        let same = cen(Onl, SessionId::M2, 0.0, 0.0);
        assert_eq!(observed_displacement(&a, &same).unwrap(), 0.0);
        let other = cen(Oc3, SessionId::M2, 0.0, 0.0);
        assert!(matches!(observed_displacement(&a, &other), Err(Error::ConditionMismatch { .. })));
        assert!(matches!(observed_displacement(&a, &a), Err(Error::SessionMismatch { .. })));
    }

    #[test]
    fn centroid_error_cases() {
        let obs = cen(Oc3, SessionId::M2, 0.0, 0.0);
        assert_eq!(centroid_error(&obs, &obs).unwrap(), 0.0);
        assert_eq!(centroid_error(&cen(Oc3, SessionId::M2, 1.0, 0.0), &obs).unwrap(), 1.0);
        assert!(centroid_error(&cen(Onl, SessionId::M2, 1.0, 0.0), &obs).is_err());
        assert!(centroid_error(&cen(Oc3, SessionId::M1, 1.0, 0.0), &obs).is_err());
    }

    #[test]
    fn within_session_cases() {
        let cs = [cen(Onl, SessionId::M1, 0.0, 0.0), cen(Oc3, SessionId::M1, 0.26, 0.0), cen(Oc3, SessionId::M2, 9.0, 9.0)];
        let d = within_session_distances(&cs, SessionId::M1).unwrap();
        assert_eq!(d, vec![(Onl, 0.0), (Oc3, 0.26)]);
        let only = within_session_distances(&cs[..1], SessionId::M1).unwrap();
        assert_eq!(only, vec![(Onl, 0.0)]);
        assert_eq!(within_session_distances(&cs, SessionId::M2), Err(Error::MissingReference(SessionId::M2)));
    }

    #[test]
    fn rank_cases() {
        let r = rank(&[(Oc3, 5.35), (Onl, 5.73), (Oc25, 6.39)], 0.0);
        assert_eq!(r.conditions(), vec![Oc3, Onl, Oc25]);
        assert!(r.tie_groups.is_empty());

        let r = rank(&[(Oc3p, 5.78), (Oc3, 5.77)], 0.05);
        assert_eq!(r.conditions(), vec![Oc3, Oc3p]);
        assert_eq!(r.tie_groups, vec![[Oc3, Oc3p].into_iter().collect::<BTreeSet<_>>()]);

        let r = rank(&[(Obl, 1.0)], 0.05);
        assert_eq!(r.conditions(), vec![Obl]);
        assert!(r.tie_groups.is_empty());

        // Exact equality orders by condition.
        let r = rank(&[(Oc3, 1.0), (Onl, 1.0)], 0.0);
        assert_eq!(r.conditions(), vec![Onl, Oc3]);
    }

    #[test]
    fn hierarchy_cases() {
        let r = rank(&[(Oc3, 5.35), (Onl, 5.73), (Oc25, 6.39)], 0.0);
        assert!(hierarchy_satisfied(&r, &[Oc3, Onl, Oc25]).unwrap());
        assert!(hierarchy_satisfied(&r, &[Oc3]).unwrap());
        let r2 = rank(&[(Onl, 5.0), (Oc3, 5.5), (Oc25, 6.0)], 0.0);
        assert!(!hierarchy_satisfied(&r2, &[Oc3, Onl, Oc25]).unwrap());
        assert_eq!(hierarchy_satisfied(&r, &[Obl]), Err(Error::UnknownCondition(Obl)));

        let tied = rank(&[(Oc3, 5.77), (Oc3p, 5.78)], 0.05);
        assert!(!hierarchy_satisfied(&tied, &[Oc3, Oc3p]).unwrap());
        assert!(hierarchy_satisfied(&rank(&[(Oc3, 5.77), (Oc3p, 5.78)], 0.0), &[Oc3, Oc3p]).unwrap());
    }
}
