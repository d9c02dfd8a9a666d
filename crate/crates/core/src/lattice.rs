//! Square-lattice geometry: sites, arrows (directed nearest-neighbour edges),
//! plaquets and rectangular boxes with a deterministic site numbering.
//!
//! Sites inside a [`BoxRegion`] are numbered row-major: `x2` is the outer
//! (slow) coordinate, `x1` the inner one, both ascending. Undirected edges are
//! stored canonically as `(base, +e1)` or `(base, +e2)`; an [`Arrow`] is an
//! edge together with an orientation, so reversal never needs extra storage.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Site {
    pub x1: i32,
    pub x2: i32,
}

impl Site {
    pub const fn new(x1: i32, x2: i32) -> Self {
        Self { x1, x2 }
    }

    /// Maximum-norm distance `max(|Δx1|, |Δx2|)`.
    pub fn linf_distance(self, other: Site) -> u32 {
        (self.x1 - other.x1)
            .unsigned_abs()
            .max((self.x2 - other.x2).unsigned_abs())
    }

    pub fn is_neighbor(self, other: Site) -> bool {
        (self.x1 - other.x1).abs() + (self.x2 - other.x2).abs() == 1
    }

    /// The four lattice neighbours in the order `+e1, +e2, -e1, -e2`.
    pub fn neighbors(self) -> [Site; 4] {
        [
            self + Direction::E1.unit(),
            self + Direction::E2.unit(),
            self - Direction::E1.unit(),
            self - Direction::E2.unit(),
        ]
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, rhs: Site) -> Site {
        Site::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, rhs: Site) -> Site {
        Site::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site::new(-self.x1, -self.x2)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

/// Lattice axis of a canonical edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    E1,
    E2,
}

impl Direction {
    pub fn unit(self) -> Site {
        match self {
            Direction::E1 => Site::new(1, 0),
            Direction::E2 => Site::new(0, 1),
        }
    }

    pub fn orthogonal(self) -> Direction {
        match self {
            Direction::E1 => Direction::E2,
            Direction::E2 => Direction::E1,
        }
    }
}

/// An undirected nearest-neighbour edge, stored as `base -> base + dir`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub base: Site,
    pub dir: Direction,
}

impl Edge {
    pub fn new(base: Site, dir: Direction) -> Self {
        Self { base, dir }
    }

    pub fn tip(self) -> Site {
        self.base + self.dir.unit()
    }

    pub fn forward(self) -> Arrow {
        Arrow {
            initial: self.base,
            terminal: self.tip(),
        }
    }
}

/// A directed nearest-neighbour pair `(a_i, a_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Arrow {
    initial: Site,
    terminal: Site,
}

impl Arrow {
    pub fn new(initial: Site, terminal: Site) -> Result<Self> {
        if !initial.is_neighbor(terminal) {
            return Err(Error::NotNeighbors { initial, terminal });
        }
        Ok(Self { initial, terminal })
    }

    pub fn initial(self) -> Site {
        self.initial
    }

    pub fn terminal(self) -> Site {
        self.terminal
    }

    /// `ā = (a_t, a_i)`.
    pub fn reverse(self) -> Arrow {
        Arrow {
            initial: self.terminal,
            terminal: self.initial,
        }
    }

    /// Unit step `a_t - a_i`.
    pub fn step(self) -> Site {
        self.terminal - self.initial
    }

    /// Canonical edge and whether the arrow runs along it (`true`) or against it.
    pub fn edge(self) -> (Edge, bool) {
        match (self.step().x1, self.step().x2) {
            (1, 0) => (Edge::new(self.initial, Direction::E1), true),
            (0, 1) => (Edge::new(self.initial, Direction::E2), true),
            (-1, 0) => (Edge::new(self.terminal, Direction::E1), false),
            (0, -1) => (Edge::new(self.terminal, Direction::E2), false),
            _ => unreachable!("arrows join nearest neighbours"),
        }
    }

    /// The unique plaquet whose oriented boundary contains this arrow.
    ///
    /// Orientation matters: for an interior edge `a` and its reverse the two
    /// plaquets lie on opposite sides of the edge.
    pub fn plaquet(self) -> Plaquet {
        let x = self.initial;
        let corner = match (self.step().x1, self.step().x2) {
            (1, 0) => x,
            (0, 1) => x - Site::new(1, 0),
            (-1, 0) => x - Site::new(1, 1),
            (0, -1) => x - Site::new(0, 1),
            _ => unreachable!("arrows join nearest neighbours"),
        };
        Plaquet::new(corner)
    }
}

impl fmt::Display for Arrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.initial, self.terminal)
    }
}

/// Unit square `{x1, x1+1} × {x2, x2+1}` labelled by its lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plaquet {
    pub corner: Site,
}

impl Plaquet {
    pub const fn new(corner: Site) -> Self {
        Self { corner }
    }

    /// Corners in counterclockwise order starting from the lower-left one.
    pub fn sites(self) -> [Site; 4] {
        let x = self.corner;
        [
            x,
            x + Site::new(1, 0),
            x + Site::new(1, 1),
            x + Site::new(0, 1),
        ]
    }

    /// Oriented boundary `∂f`, counterclockwise:
    /// `(x, x+e1), (x+e1, x+e1+e2), (x+e1+e2, x+e2), (x+e2, x)`.
    pub fn boundary(self) -> [Arrow; 4] {
        let s = self.sites();
        [
            Arrow { initial: s[0], terminal: s[1] },
            Arrow { initial: s[1], terminal: s[2] },
            Arrow { initial: s[2], terminal: s[3] },
            Arrow { initial: s[3], terminal: s[0] },
        ]
    }
}

/// A rectangle of `Z²`, either the centred cube `Λ_L` or an explicit
/// rectangle given by two corners (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoxRegion {
    lo: Site,
    hi: Site,
    half_width: Option<u32>,
}

impl BoxRegion {
    /// `Λ_L = {x : max(|x1|, |x2|) ≤ L}` for `L ≥ 1`.
    pub fn centered(half_width: u32) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::InvalidBox("half-width L must be a positive integer".into()));
        }
        let l = i32::try_from(half_width)
            .map_err(|_| Error::InvalidBox(format!("half-width {half_width} too large")))?;
        Ok(Self {
            lo: Site::new(-l, -l),
            hi: Site::new(l, l),
            half_width: Some(half_width),
        })
    }

    /// Rectangle spanned by two opposite corners, in any order.
    pub fn rectangle(a: Site, b: Site) -> Result<Self> {
        let lo = Site::new(a.x1.min(b.x1), a.x2.min(b.x2));
        let hi = Site::new(a.x1.max(b.x1), a.x2.max(b.x2));
        let w = i64::from(hi.x1) - i64::from(lo.x1) + 1;
        let h = i64::from(hi.x2) - i64::from(lo.x2) + 1;
        if w * h > i64::from(u32::MAX) {
            return Err(Error::InvalidBox(format!("rectangle {lo}..{hi} too large")));
        }
        Ok(Self {
            lo,
            hi,
            half_width: None,
        })
    }

    pub fn lo(&self) -> Site {
        self.lo
    }

    pub fn hi(&self) -> Site {
        self.hi
    }

    pub fn half_width(&self) -> Option<u32> {
        self.half_width
    }

    pub fn width(&self) -> usize {
        (self.hi.x1 - self.lo.x1 + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.hi.x2 - self.lo.x2 + 1) as usize
    }

    pub fn num_sites(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: Site) -> bool {
        (self.lo.x1..=self.hi.x1).contains(&x.x1) && (self.lo.x2..=self.hi.x2).contains(&x.x2)
    }

    pub fn index(&self, x: Site) -> Option<usize> {
        self.contains(x).then(|| {
            (x.x2 - self.lo.x2) as usize * self.width() + (x.x1 - self.lo.x1) as usize
        })
    }

    /// Inverse of [`BoxRegion::index`].
    pub fn site(&self, i: usize) -> Site {
        debug_assert!(i < self.num_sites());
        let w = self.width();
        Site::new(self.lo.x1 + (i % w) as i32, self.lo.x2 + (i / w) as i32)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.num_sites()).map(move |i| self.site(i))
    }

    /// In-box neighbours of `x`, in the order `+e1, +e2, -e1, -e2`.
    pub fn neighbors(&self, x: Site) -> impl Iterator<Item = Site> + '_ {
        x.neighbors().into_iter().filter(move |y| self.contains(*y))
    }

    fn num_horizontal_edges(&self) -> usize {
        (self.width() - 1) * self.height()
    }

    pub fn num_edges(&self) -> usize {
        self.num_horizontal_edges() + self.width() * (self.height() - 1)
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.contains(e.base) && self.contains(e.tip())
    }

    /// Dense index of a canonical edge: horizontal edges first (row-major by
    /// base site), then vertical edges (row-major by base site).
    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        if !self.contains_edge(e) {
            return None;
        }
        let c = (e.base.x1 - self.lo.x1) as usize;
        let r = (e.base.x2 - self.lo.x2) as usize;
        Some(match e.dir {
            Direction::E1 => r * (self.width() - 1) + c,
            Direction::E2 => self.num_horizontal_edges() + r * self.width() + c,
        })
    }

    pub fn edge(&self, i: usize) -> Edge {
        let nh = self.num_horizontal_edges();
        if i < nh {
            let w = self.width() - 1;
            Edge::new(
                Site::new(self.lo.x1 + (i % w) as i32, self.lo.x2 + (i / w) as i32),
                Direction::E1,
            )
        } else {
            let j = i - nh;
            let w = self.width();
            Edge::new(
                Site::new(self.lo.x1 + (j % w) as i32, self.lo.x2 + (j / w) as i32),
                Direction::E2,
            )
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.num_edges()).map(move |i| self.edge(i))
    }

    pub fn contains_arrow(&self, a: Arrow) -> bool {
        self.contains(a.initial) && self.contains(a.terminal)
    }

    /// All arrows of the box, `A_Λ`; each edge contributes its forward arrow
    /// followed by the reversed one.
    pub fn arrows(&self) -> Vec<Arrow> {
        self.edges()
            .flat_map(|e| {
                let a = e.forward();
                [a, a.reverse()]
            })
            .collect()
    }

    pub fn num_plaquets(&self) -> usize {
        (self.width() - 1) * (self.height() - 1)
    }

    pub fn contains_plaquet(&self, f: Plaquet) -> bool {
        self.contains(f.corner) && self.contains(f.corner + Site::new(1, 1))
    }

    /// Row-major index of a plaquet among `F_Λ`.
    pub fn plaquet_index(&self, f: Plaquet) -> Option<usize> {
        self.contains_plaquet(f).then(|| {
            (f.corner.x2 - self.lo.x2) as usize * (self.width() - 1)
                + (f.corner.x1 - self.lo.x1) as usize
        })
    }

    pub fn plaquet(&self, i: usize) -> Plaquet {
        let w = self.width() - 1;
        Plaquet::new(Site::new(
            self.lo.x1 + (i % w) as i32,
            self.lo.x2 + (i / w) as i32,
        ))
    }

    /// `F_Λ`: unit squares entirely inside the box, row-major by corner.
    pub fn plaquets(&self) -> impl Iterator<Item = Plaquet> + '_ {
        (0..self.num_plaquets()).map(move |i| self.plaquet(i))
    }
}

impl fmt::Display for BoxRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.half_width {
            Some(l) => write!(f, "Λ_{l}"),
            None => write!(f, "[{}..{}]", self.lo, self.hi),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BoxRepr {
    Centered {
        #[serde(rename = "L")]
        l: u32,
    },
    Rectangle {
        lo: [i32; 2],
        hi: [i32; 2],
    },
}

impl Serialize for BoxRegion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.half_width {
            Some(l) => BoxRepr::Centered { l },
            None => BoxRepr::Rectangle {
                lo: [self.lo.x1, self.lo.x2],
                hi: [self.hi.x1, self.hi.x2],
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoxRegion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = BoxRepr::deserialize(d)?;
        match repr {
            BoxRepr::Centered { l } => BoxRegion::centered(l),
            BoxRepr::Rectangle { lo, hi } => {
                BoxRegion::rectangle(Site::new(lo[0], lo[1]), Site::new(hi[0], hi[1]))
            }
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> BoxRegion {
        BoxRegion::rectangle(Site::new(0, 0), Site::new(1, 1)).unwrap()
    }

    fn arrow(a: (i32, i32), b: (i32, i32)) -> Arrow {
        Arrow::new(Site::new(a.0, a.1), Site::new(b.0, b.1)).unwrap()
    }

    #[test]
    fn site_enumeration() {
        let b = BoxRegion::centered(1).unwrap();
        let sites: Vec<_> = b.sites().collect();
        assert_eq!(sites.len(), 9);
        assert_eq!(sites[0], Site::new(-1, -1));
        assert_eq!(sites[1], Site::new(0, -1));
        assert_eq!(sites[8], Site::new(1, 1));
        assert_eq!(BoxRegion::centered(4).unwrap().num_sites(), 81);
        assert_eq!(unit_square().num_sites(), 4);
        assert!(BoxRegion::centered(0).is_err());
    }

    #[test]
    fn arrow_counts_match_grid_graph() {
        assert_eq!(unit_square().arrows().len(), 8);
        for l in 1..6u32 {
            let b = BoxRegion::centered(l).unwrap();
            // brute force: every ordered pair of neighbouring box sites
            let sites: Vec<_> = b.sites().collect();
            let brute = sites
                .iter()
                .flat_map(|x| sites.iter().map(move |y| (x, y)))
                .filter(|(x, y)| x.is_neighbor(**y))
                .count();
            let n = (2 * l + 1) as usize;
            assert_eq!(b.arrows().len(), brute);
            assert_eq!(brute, 2 * 2 * (n - 1) * n);
        }
        assert_eq!(BoxRegion::centered(1).unwrap().arrows().len(), 24);
    }

    #[test]
    fn arrows_closed_under_reversal() {
        let b = BoxRegion::rectangle(Site::new(-2, 0), Site::new(1, 2)).unwrap();
        let arrows = b.arrows();
        for a in &arrows {
            assert!(arrows.contains(&a.reverse()));
            assert!(b.contains_arrow(*a));
        }
    }

    #[test]
    fn plaquet_counts() {
        assert_eq!(unit_square().plaquets().collect::<Vec<_>>(), vec![Plaquet::new(Site::new(0, 0))]);
        assert_eq!(BoxRegion::centered(1).unwrap().num_plaquets(), 4);
        assert_eq!(BoxRegion::centered(4).unwrap().plaquets().count(), 64);
    }

    #[test]
    fn boundary_of_origin_plaquet() {
        let f = Plaquet::new(Site::new(0, 0));
        assert_eq!(
            f.boundary(),
            [
                arrow((0, 0), (1, 0)),
                arrow((1, 0), (1, 1)),
                arrow((1, 1), (0, 1)),
                arrow((0, 1), (0, 0)),
            ]
        );
        let g = Plaquet::new(Site::new(2, -3));
        let shift = Site::new(2, -3);
        for (a, b) in f.boundary().iter().zip(g.boundary()) {
            assert_eq!(a.initial() + shift, b.initial());
            assert_eq!(a.terminal() + shift, b.terminal());
        }
    }

    #[test]
    fn boundary_is_closed_ccw_cycle() {
        let f = Plaquet::new(Site::new(-1, 3));
        let bd = f.boundary();
        for k in 0..4 {
            assert_eq!(bd[k].terminal(), bd[(k + 1) % 4].initial());
        }
        // counterclockwise: signed area via shoelace is +1
        let s = f.sites();
        let area2: i32 = (0..4)
            .map(|k| s[k].x1 * s[(k + 1) % 4].x2 - s[(k + 1) % 4].x1 * s[k].x2)
            .sum();
        assert_eq!(area2, 2);
    }

    #[test]
    fn interior_edges_border_two_plaquets() {
        // every reversed boundary arrow of an interior plaquet is a boundary
        // arrow of exactly one neighbouring plaquet
        let b = BoxRegion::centered(3).unwrap();
        let all: Vec<_> = b.plaquets().collect();
        for f in &all {
            for a in f.boundary() {
                let owners: Vec<_> = all
                    .iter()
                    .filter(|g| g.boundary().contains(&a.reverse()))
                    .collect();
                assert!(owners.len() <= 1);
                if b.contains_plaquet(a.reverse().plaquet()) {
                    assert_eq!(owners.len(), 1);
                    assert_ne!(*owners[0], *f);
                }
            }
        }
    }

    #[test]
    fn plaquet_of_arrow_examples() {
        assert_eq!(arrow((0, 0), (1, 0)).plaquet().corner, Site::new(0, 0));
        assert_eq!(arrow((1, 0), (0, 0)).plaquet().corner, Site::new(0, -1));
        assert_eq!(arrow((0, 0), (0, 1)).plaquet().corner, Site::new(-1, 0));
    }

    #[test]
    fn plaquet_of_arrow_is_unique_owner() {
        // exhaustive over a window of plaquets large enough to hold all candidates
        let b = BoxRegion::centered(3).unwrap();
        let candidates: Vec<_> = BoxRegion::centered(5).unwrap().plaquets().collect();
        for a in b.arrows() {
            let owners: Vec<_> = candidates
                .iter()
                .filter(|f| f.boundary().contains(&a))
                .collect();
            assert_eq!(owners.len(), 1);
            assert_eq!(*owners[0], a.plaquet());
            assert_ne!(a.plaquet(), a.reverse().plaquet());
        }
    }

    #[test]
    fn reverse_is_involution() {
        let a = arrow((0, 0), (1, 0));
        assert_eq!(a.reverse(), arrow((1, 0), (0, 0)));
        assert_eq!(a.reverse().reverse(), a);
        assert!(Arrow::new(Site::new(0, 0), Site::new(1, 1)).is_err());
    }

    #[test]
    fn edge_indexing_round_trips() {
        let b = BoxRegion::rectangle(Site::new(-1, -2), Site::new(2, 0)).unwrap();
        for i in 0..b.num_edges() {
            assert_eq!(b.edge_index(b.edge(i)), Some(i));
        }
        for a in b.arrows() {
            let (e, fwd) = a.edge();
            assert!(b.edge_index(e).is_some());
            assert_eq!(if fwd { e.forward() } else { e.forward().reverse() }, a);
        }
        for (i, f) in b.plaquets().enumerate() {
            assert_eq!(b.plaquet_index(f), Some(i));
        }
    }

    #[test]
    fn box_json_schema() {
        let b = BoxRegion::centered(3).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), r#"{"L":3}"#);
        let r: BoxRegion = serde_json::from_str(r#"{"lo":[0,0],"hi":[1,1]}"#).unwrap();
        assert_eq!(r, unit_square());
        assert!(serde_json::from_str::<BoxRegion>(r#"{"L":0}"#).is_err());
    }

    proptest! {
        #[test]
        fn index_round_trip(l in 1u32..8, i in 0usize..10_000) {
            let b = BoxRegion::centered(l).unwrap();
            let i = i % b.num_sites();
            prop_assert_eq!(b.index(b.site(i)), Some(i));
            prop_assert_eq!(b.num_plaquets(), (2 * l as usize).pow(2));
            prop_assert_eq!(b.num_sites(), (2 * l as usize + 1).pow(2));
        }

        #[test]
        fn arrow_lies_on_its_plaquet(x1 in -20i32..20, x2 in -20i32..20, d in 0usize..4) {
            let x = Site::new(x1, x2);
            let a = Arrow::new(x, x.neighbors()[d]).unwrap();
            prop_assert!(a.plaquet().boundary().contains(&a));
        }
    }
}
