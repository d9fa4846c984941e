use super::LinearMeromorphicSystem;
use crate::error::Result;
use crate::rational::{order_along, Chart, DivisorComponent, MultiPoly, RationalFn};

/// Result of pulling a system back along a curve.
#[derive(Clone, Debug, PartialEq)]
pub enum Pullback {
    /// The curve lies inside the polar set; `component` names the divisor
    /// component when the pole is along one.
    NullMorphism {
        component: Option<usize>,
    },
    System(LinearMeromorphicSystem),
}

impl Pullback {
    pub fn is_null(&self) -> bool {
        matches!(self, Pullback::NullMorphism { .. })
    }

    pub fn system(&self) -> Option<&LinearMeromorphicSystem> {
        match self {
            Pullback::System(s) => Some(s),
            Pullback::NullMorphism { .. } => None,
        }
    }
}

/// Substitutes the polynomial curve `t ↦ γ(t)` and contracts with `γ'`.
///
/// The one-variable chart carries the components whose equations stay
/// non-constant along the curve.
pub fn pullback_along_curve(system: &LinearMeromorphicSystem, curve: &[MultiPoly]) -> Result<Pullback> {
    let n = system.nvars();
    if curve.len() != n || curve.iter().any(|c| c.nvars() != 1) {
        return Err(crate::Error::Validation(
            "curve must have one polynomial in t per chart coordinate".into(),
        ));
    }
    let mut divisor = Vec::new();
    for (a, comp) in system.chart().divisor().iter().enumerate() {
        let restricted = comp.poly().compose(curve);
        if restricted.is_zero() {
            let polar = system
                .matrices()
                .iter()
                .flat_map(|m| m.entries())
                .any(|(_, _, e)| !order_along(e, comp).is_at_least(0));
            if polar {
                return Ok(Pullback::NullMorphism { component: Some(a) });
            }
        } else if !restricted.is_constant() {
            divisor.push(DivisorComponent::new(restricted, comp.multiplicity())?);
        }
    }
    let images: Vec<RationalFn> = curve.iter().cloned().map(RationalFn::from_poly).collect();
    for m in system.matrices() {
        for (_, _, e) in m.entries() {
            if !e.is_zero() && e.den().compose(curve).is_zero() {
                return Ok(Pullback::NullMorphism { component: None });
            }
        }
    }
    let target = Chart::new(vec!["t".into()], divisor)?;
    Ok(Pullback::System(system.pullback_map(&images, target)))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::rational::{parse_rational, RatMatrix};

    fn p2(s: &str) -> RationalFn {
        parse_rational(s, &["z1".into(), "z2".into()], &BTreeMap::new()).unwrap()
    }

    fn chart() -> Chart {
        Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap()
    }

    fn t() -> MultiPoly {
        MultiPoly::var(1, 0)
    }

    #[test]
    fn curve_inside_polar_divisor_is_null() {
        let a2 = RatMatrix::identity(2, 2).scale(&p2("1/z1"));
        let s = LinearMeromorphicSystem::new(chart(), vec![RatMatrix::zeros(2, 2, 2), a2]).unwrap();
        let r = pullback_along_curve(&s, &[MultiPoly::zero(1), t()]).unwrap();
        assert_eq!(r, Pullback::NullMorphism { component: Some(0) });
    }

    #[test]
    fn flat_pulls_back_to_zero() {
        let s = LinearMeromorphicSystem::zero(chart(), 2);
        let r = pullback_along_curve(&s, &[t(), t().pow(3)]).unwrap();
        assert!(r.system().unwrap().is_zero());
    }

    #[test]
    fn hopf_along_first_axis() {
        let mut a1 = RatMatrix::zeros(2, 2, 2);
        a1.set(0, 0, p2("1/z1"));
        let s = LinearMeromorphicSystem::new(chart(), vec![a1, RatMatrix::zeros(2, 2, 2)]).unwrap();
        let r = pullback_along_curve(&s, &[t(), MultiPoly::zero(1)]).unwrap();
        let sys = r.system().unwrap();
        let expect = parse_rational("1/t", &["t".into()], &BTreeMap::new()).unwrap();
        assert_eq!(sys.matrix(0).get(0, 0), &expect);
        assert!(sys.matrix(0).get(1, 1).is_zero());
        assert_eq!(sys.chart().divisor().len(), 1);
    }
}
