//! Normal forms for surface sheaves.
//!
//! Every locally free sheaf the ledger meets is a tensor product of
//! Serre-constructed rank-2 bundles with a line bundle; duals are removed with
//! `P* = P (x) det(P)^-1`, so a key is a multiset of bundle names, a line
//! bundle (lattice coordinates plus the `g` bit) and an optional set of
//! ideal-sheaf point sets.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sheaf::{PointConfig, SerreBundle, SheafExpr};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Key {
    /// `P1 (x) ... (x) Pk (x) M (x) I_Z1 (x) ...` with `M = O(line) (x) g^gamma`.
    Bundle {
        factors: Vec<String>,
        line: Vec<i64>,
        gamma: u8,
        ideal: Vec<String>,
    },
    /// `O_Z` tensored with a trivial bundle of rank `mult`.
    Sky { points: String, mult: u32 },
    /// Line bundle of the given degree on a smooth rational curve.
    Curve { curve: String, degree: i64 },
    Sum(Vec<Key>),
}

/// The Serre bundles a key may mention, with their determinants.
#[derive(Clone, Debug, Default)]
pub struct SerreTable {
    pub bundles: BTreeMap<String, Arc<SerreBundle>>,
}

impl SerreTable {
    pub fn get(&self, name: &str) -> Result<&Arc<SerreBundle>> {
        self.bundles
            .get(name)
            .ok_or_else(|| Error::Input(format!("unknown Serre bundle {name}")))
    }

    pub fn det_line(&self, name: &str) -> Result<(Vec<i64>, u8)> {
        let s = self.get(name)?;
        Ok((s.det.coords()?, s.det.character.g))
    }
}

fn add(a: &[i64], b: &[i64], sign: i64) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + sign * y).collect()
}

impl Key {
    pub fn line(line: Vec<i64>, gamma: u8) -> Key {
        Key::Bundle { factors: vec![], line, gamma, ideal: vec![] }
    }

    pub fn structure(rank: usize) -> Key {
        Key::line(vec![0; rank], 0)
    }

    pub fn rank(&self) -> u64 {
        match self {
            Key::Bundle { factors, .. } => 1 << factors.len(),
            Key::Sky { .. } => 0,
            Key::Curve { .. } => 0,
            Key::Sum(v) => v.iter().map(Key::rank).sum(),
        }
    }

    pub fn is_locally_free(&self) -> bool {
        match self {
            Key::Bundle { ideal, .. } => ideal.is_empty(),
            Key::Sum(v) => v.iter().all(Key::is_locally_free),
            _ => false,
        }
    }

    /// Line-bundle part of a factor-free key.
    pub fn as_line(&self) -> Option<(&[i64], u8)> {
        match self {
            Key::Bundle { factors, line, gamma, .. } if factors.is_empty() => Some((line, *gamma)),
            _ => None,
        }
    }

    pub fn ideal(&self) -> &[String] {
        match self {
            Key::Bundle { ideal, .. } => ideal,
            _ => &[],
        }
    }

    pub fn without_ideal(&self) -> Key {
        match self {
            Key::Bundle { factors, line, gamma, .. } => Key::Bundle {
                factors: factors.clone(),
                line: line.clone(),
                gamma: *gamma,
                ideal: vec![],
            },
            k => k.clone(),
        }
    }

    pub fn with_ideal(&self, points: &str) -> Result<Key> {
        match self {
            Key::Bundle { factors, line, gamma, ideal } => {
                if ideal.iter().any(|z| z == points) {
                    return Err(Error::Unsupported(format!("square of the ideal of {points}")));
                }
                let mut ideal = ideal.clone();
                ideal.push(points.to_string());
                ideal.sort();
                Ok(Key::Bundle { factors: factors.clone(), line: line.clone(), gamma: *gamma, ideal })
            }
            _ => Err(Error::Unsupported(format!("ideal twist of {self}"))),
        }
    }

    /// `self (x) O(line) (x) g^gamma`.
    pub fn twist(&self, l: &[i64], g: u8) -> Key {
        match self {
            Key::Bundle { factors, line, gamma, ideal } => Key::Bundle {
                factors: factors.clone(),
                line: add(line, l, 1),
                gamma: (gamma + g) % 2,
                ideal: ideal.clone(),
            },
            Key::Sum(v) => Key::Sum(v.iter().map(|k| k.twist(l, g)).collect()).normalized(),
            k => k.clone(),
        }
    }

    fn normalized(self) -> Key {
        match self {
            Key::Sum(v) => {
                let mut flat = Vec::new();
                for k in v {
                    match k.normalized() {
                        Key::Sum(inner) => flat.extend(inner),
                        k => flat.push(k),
                    }
                }
                flat.sort();
                if flat.len() == 1 {
                    flat.pop().unwrap()
                } else {
                    Key::Sum(flat)
                }
            }
            k => k,
        }
    }

    pub fn sum(parts: Vec<Key>) -> Key {
        Key::Sum(parts).normalized()
    }

    /// Dual of a locally free key.
    pub fn dual(&self, serre: &SerreTable) -> Result<Key> {
        match self {
            Key::Bundle { factors, line, gamma, ideal } => {
                if !ideal.is_empty() {
                    return Err(Error::Unsupported(format!("dual of the non-locally-free {self}")));
                }
                let mut l: Vec<i64> = line.iter().map(|x| -x).collect();
                let mut g = *gamma;
                for f in factors {
                    let (d, dg) = serre.det_line(f)?;
                    l = add(&l, &d, -1);
                    g = (g + dg) % 2;
                }
                Ok(Key::Bundle { factors: factors.clone(), line: l, gamma: g, ideal: vec![] })
            }
            Key::Sum(v) => Ok(Key::sum(v.iter().map(|k| k.dual(serre)).collect::<Result<_>>()?)),
            _ => Err(Error::Unsupported(format!("dual of the torsion sheaf {self}"))),
        }
    }

    pub fn tensor(&self, other: &Key, points: &PointConfig) -> Result<Key> {
        match (self, other) {
            (Key::Sum(v), o) | (o, Key::Sum(v)) => Ok(Key::sum(
                v.iter().map(|k| k.tensor(o, points)).collect::<Result<_>>()?,
            )),
            (
                Key::Bundle { factors: f1, line: l1, gamma: g1, ideal: i1 },
                Key::Bundle { factors: f2, line: l2, gamma: g2, ideal: i2 },
            ) => {
                for a in i1 {
                    for b in i2 {
                        if points.is_subset(a, b) || points.is_subset(b, a) {
                            return Err(Error::Unsupported(format!(
                                "tensor of ideals of overlapping point sets {a}, {b}"
                            )));
                        }
                    }
                }
                let mut factors = f1.clone();
                factors.extend(f2.iter().cloned());
                factors.sort();
                let mut ideal = i1.clone();
                ideal.extend(i2.iter().cloned());
                ideal.sort();
                Ok(Key::Bundle { factors, line: add(l1, l2, 1), gamma: (g1 + g2) % 2, ideal })
            }
            (Key::Sky { points: p, mult }, b @ Key::Bundle { .. })
            | (b @ Key::Bundle { .. }, Key::Sky { points: p, mult }) => {
                if !b.ideal().is_empty() {
                    return Err(Error::Unsupported("skyscraper tensored with an ideal sheaf".into()));
                }
                Ok(Key::Sky { points: p.clone(), mult: mult * b.rank() as u32 })
            }
            (Key::Curve { curve, degree }, b @ Key::Bundle { .. })
            | (b @ Key::Bundle { .. }, Key::Curve { curve, degree }) => {
                if b.rank() != 1 || !b.ideal().is_empty() {
                    return Err(Error::Unsupported("curve sheaf tensored with a non-line bundle".into()));
                }
                Err(Error::Unsupported(format!("restriction of {b} to {curve} (degree {degree})")))
            }
            (a, b) => Err(Error::Unsupported(format!("tensor of torsion sheaves {a}, {b}"))),
        }
    }

    /// Normal form of a surface expression.
    pub fn of(e: &SheafExpr, serre: &SerreTable, points: &PointConfig) -> Result<Key> {
        let g = e.geometry();
        if !g.is_surface() {
            return Err(Error::Unsupported(format!("{} is not a surface sheaf", e.label())));
        }
        let rank = g.lattice.rank();
        Ok(match e {
            SheafExpr::Structure(_) => Key::structure(rank),
            SheafExpr::Line(l) => Key::line(l.coords()?, l.character.g),
            SheafExpr::Serre(s) => {
                let known = serre.get(&s.name)?;
                if known.as_ref() != s.as_ref() {
                    return Err(Error::Input(format!("conflicting definitions of {}", s.name)));
                }
                Key::Bundle { factors: vec![s.name.clone()], line: vec![0; rank], gamma: 0, ideal: vec![] }
            }
            SheafExpr::Ideal { points: z, twist, .. } => Key::of(twist, serre, points)?.with_ideal(z)?,
            SheafExpr::Skyscraper { points: z, .. } => Key::Sky { points: z.clone(), mult: 1 },
            SheafExpr::Dual(x) => Key::of(x, serre, points)?.dual(serre)?,
            SheafExpr::DirectSum(a, b) => {
                Key::sum(vec![Key::of(a, serre, points)?, Key::of(b, serre, points)?])
            }
            SheafExpr::Tensor(a, b) => Key::of(a, serre, points)?.tensor(&Key::of(b, serre, points)?, points)?,
            SheafExpr::Lambda2(x) => {
                let k = Key::of(x, serre, points)?;
                match &k {
                    Key::Bundle { factors, line, gamma, ideal } if factors.len() == 1 && ideal.is_empty() => {
                        let (d, dg) = serre.det_line(&factors[0])?;
                        Key::line(add(&d, &add(line, line, 1), 1), (dg + 2 * gamma) % 2)
                    }
                    Key::Sum(parts) if parts.len() == 2 && parts.iter().all(|p| p.as_line().is_some()) => {
                        parts[0].tensor(&parts[1], points)?
                    }
                    _ => return Err(Error::Unsupported(format!("lambda2 of {k}"))),
                }
            }
            SheafExpr::End(x) => {
                let k = Key::of(x, serre, points)?;
                k.tensor(&k.dual(serre)?, points)?
            }
            other => return Err(Error::Unsupported(format!("{} on a surface", other.label()))),
        })
    }

    /// Serre bundle names mentioned anywhere in the key.
    pub fn factors(&self) -> Vec<&str> {
        match self {
            Key::Bundle { factors, .. } => factors.iter().map(String::as_str).collect(),
            Key::Sum(v) => v.iter().flat_map(Key::factors).collect(),
            _ => vec![],
        }
    }
}

fn line_label(line: &[i64], gamma: u8) -> Option<String> {
    let mut s = String::new();
    if line.iter().any(|x| *x != 0) {
        let c: Vec<String> = line.iter().map(i64::to_string).collect();
        s.push_str(&format!("O({})", c.join(",")));
    }
    if gamma == 1 {
        if !s.is_empty() {
            s.push('.');
        }
        s.push('g');
    }
    (!s.is_empty()).then_some(s)
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Bundle { factors, line, gamma, ideal } => {
                let mut parts: Vec<String> = factors.clone();
                parts.extend(line_label(line, *gamma));
                parts.extend(ideal.iter().map(|z| format!("I[{z}]")));
                if parts.is_empty() {
                    write!(f, "O")
                } else {
                    write!(f, "{}", parts.join("."))
                }
            }
            Key::Sky { points, mult } => {
                if *mult == 1 {
                    write!(f, "O[{points}]")
                } else {
                    write!(f, "O[{points}]^{mult}")
                }
            }
            Key::Curve { curve, degree } => write!(f, "O_{curve}({degree})"),
            Key::Sum(v) => {
                let p: Vec<String> = v.iter().map(Key::to_string).collect();
                write!(f, "({})", p.join(" + "))
            }
        }
    }
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Geometry;
    use crate::sheaf::LineBundle;

    fn setup() -> (SerreTable, PointConfig, SheafExpr, SheafExpr) {
        let s = Geometry::k3();
        let mut pc = PointConfig::default();
        pc.add_set("ZA", 2, None).unwrap();
        pc.add_set("ZB", 3, None).unwrap();
        let lstar = LineBundle::new(s.divisor_i(&[1, -1]));
        let a = Arc::new(SerreBundle {
            name: "Astar".into(),
            det: lstar.clone(),
            points: "ZA".into(),
            n_points: 2,
            section: "sA".into(),
        });
        let b = Arc::new(SerreBundle {
            name: "B".into(),
            det: lstar,
            points: "ZB".into(),
            n_points: 3,
            section: "sB".into(),
        });
        let mut t = SerreTable::default();
        t.bundles.insert("Astar".into(), a.clone());
        t.bundles.insert("B".into(), b.clone());
        (t, pc, SheafExpr::Serre(a), SheafExpr::Serre(b))
    }

    #[test]
    fn duals_normalise() {
        let (t, pc, a, b) = setup();
        let k = |e: &SheafExpr| Key::of(e, &t, &pc).unwrap();
        assert_eq!(k(&a.clone().dual()).to_string(), "Astar.O(-1,1)");
        assert_eq!(k(&a.clone().dual().dual()), k(&a));
        // A* (x) B* = A (x) B (x) L^... ; End is self-dual
        let end = SheafExpr::End(Box::new(b.clone()));
        assert_eq!(k(&end).dual(&t).unwrap(), k(&end));
        assert_eq!(k(&end).to_string(), "B.B.O(-1,1)");
        let x = a.clone().tensor(b.clone().dual());
        assert_eq!(k(&x).rank(), 4);
        assert_eq!(k(&x).dual(&t).unwrap().dual(&t).unwrap(), k(&x));
    }

    #[test]
    fn ideals_and_sums() {
        let (t, pc, a, _) = setup();
        let s = a.geometry();
        let i = SheafExpr::Ideal { points: "ZA".into(), n: 2, twist: Box::new(SheafExpr::structure(&s)) };
        assert_eq!(Key::of(&i, &t, &pc).unwrap().to_string(), "I[ZA]");
        let sky = SheafExpr::Skyscraper { geom: s.clone(), points: "ZB".into(), n: 3 };
        let sum = i.clone().sum(sky.clone());
        let k = Key::of(&sum, &t, &pc).unwrap();
        assert_eq!(k, Key::of(&sky.sum(i.clone()), &t, &pc).unwrap());
        assert!(Key::of(&i.clone().tensor(i), &t, &pc).is_err());
        let l2 = SheafExpr::Lambda2(Box::new(a));
        assert_eq!(Key::of(&l2, &t, &pc).unwrap().to_string(), "O(1,-1)");
    }
}
