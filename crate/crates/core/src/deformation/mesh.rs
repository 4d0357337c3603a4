use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Material region of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Conductor,
    Insulator,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Conductor => "conductor",
            Region::Insulator => "insulator",
        }
    }

    fn parse(s: &str) -> Option<Region> {
        match s {
            "conductor" => Some(Region::Conductor),
            "insulator" => Some(Region::Insulator),
            _ => None,
        }
    }
}

/// Simplicial mesh of the reference body `Ω` with a conductor subdomain `ω`
/// and a clamped boundary portion `Γ0`.
///
/// Invariants established by [`ReferenceDomain::new`]: elements are
/// positively oriented and conforming, `Ω` and `ω` are connected, no conductor
/// vertex lies on `∂Ω`, and `Γ0` is a nonempty set of boundary vertices.
#[derive(Debug, Clone)]
pub struct ReferenceDomain {
    dim: usize,
    vertices: Vec<[f64; 3]>,
    elements: Vec<Vec<usize>>,
    regions: Vec<Region>,
    gamma0: Vec<usize>,
    // Derived data.
    ref_inverse: Vec<DMatrix<f64>>,
    volumes: Vec<f64>,
    boundary_vertices: Vec<bool>,
    is_gamma0: Vec<bool>,
}

/// Facet key: sorted vertex indices.
fn facets_of(el: &[usize]) -> Vec<Vec<usize>> {
    (0..el.len())
        .map(|skip| {
            let mut f: Vec<usize> = el.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v).collect();
            f.sort_unstable();
            f
        })
        .collect()
}

fn factorial(d: usize) -> f64 {
    (1..=d).product::<usize>() as f64
}

/// Edge matrix with columns `x_k - x_0`.
pub(crate) fn edge_matrix(dim: usize, pts: &[[f64; 3]], el: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |r, c| pts[el[c + 1]][r] - pts[el[0]][r])
}

impl ReferenceDomain {
    pub fn new(
        dim: usize,
        vertices: Vec<[f64; 3]>,
        elements: Vec<Vec<usize>>,
        regions: Vec<Region>,
        mut gamma0: Vec<usize>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(format!("meshes must be 2D or 3D, got {dim}")));
        }
        if elements.is_empty() {
            return Err(Error::InvalidMesh("mesh has no elements".into()));
        }
        if regions.len() != elements.len() {
            return Err(Error::InvalidMesh("one region tag per element required".into()));
        }
        let mut ref_inverse = Vec::with_capacity(elements.len());
        let mut volumes = Vec::with_capacity(elements.len());
        for (e, el) in elements.iter().enumerate() {
            if el.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!("element {e} has {} vertices, expected {}", el.len(), dim + 1)));
            }
            if let Some(&v) = el.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("element {e} references missing vertex {v}")));
            }
            let m = edge_matrix(dim, &vertices, el);
            let det = m.determinant();
            if det == 0.0 {
                return Err(Error::DegenerateElement { element: e });
            }
            if det < 0.0 {
                return Err(Error::InvalidMesh(format!("element {e} is negatively oriented")));
            }
            ref_inverse.push(m.try_inverse().ok_or(Error::DegenerateElement { element: e })?);
            volumes.push(det / factorial(dim));
        }

        // Conformity: every facet shared by at most two elements.
        let mut facet_owners: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (e, el) in elements.iter().enumerate() {
            for f in facets_of(el) {
                facet_owners.entry(f).or_default().push(e);
            }
        }
        let mut boundary_vertices = vec![false; vertices.len()];
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); elements.len()];
        for (f, owners) in &facet_owners {
            match owners.as_slice() {
                [_] => f.iter().for_each(|&v| boundary_vertices[v] = true),
                [a, b] => {
                    adjacency[*a].push(*b);
                    adjacency[*b].push(*a);
                }
                _ => return Err(Error::InvalidMesh(format!("facet {f:?} is shared by {} elements", owners.len()))),
            }
        }
        let connected = |keep: &dyn Fn(usize) -> bool| -> bool {
            let Some(start) = (0..elements.len()).find(|&e| keep(e)) else { return false };
            let total = (0..elements.len()).filter(|&e| keep(e)).count();
            let mut seen = vec![false; elements.len()];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut count = 1;
            while let Some(e) = queue.pop_front() {
                for &n in &adjacency[e] {
                    if keep(n) && !seen[n] {
                        seen[n] = true;
                        count += 1;
                        queue.push_back(n);
                    }
                }
            }
            count == total
        };
        if !connected(&|_| true) {
            return Err(Error::InvalidMesh("mesh is not connected".into()));
        }
        if !connected(&|e| regions[e] == Region::Conductor) {
            return Err(Error::InvalidMesh("conductor region is empty or not connected".into()));
        }
        for (e, el) in elements.iter().enumerate() {
            if regions[e] == Region::Conductor && el.iter().any(|&v| boundary_vertices[v]) {
                return Err(Error::InvalidMesh(format!("conductor element {e} touches the outer boundary")));
            }
        }

        gamma0.sort_unstable();
        gamma0.dedup();
        if gamma0.is_empty() {
            return Err(Error::InvalidMesh("clamped boundary portion is empty".into()));
        }
        let mut is_gamma0 = vec![false; vertices.len()];
        for &v in &gamma0 {
            if v >= vertices.len() || !boundary_vertices[v] {
                return Err(Error::InvalidMesh(format!("clamped vertex {v} is not on the boundary")));
            }
            is_gamma0[v] = true;
        }
        Ok(Self { dim, vertices, elements, regions, gamma0, ref_inverse, volumes, boundary_vertices, is_gamma0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn region(&self, e: usize) -> Region {
        self.regions[e]
    }

    pub fn gamma0(&self) -> &[usize] {
        &self.gamma0
    }

    pub fn is_clamped(&self, v: usize) -> bool {
        self.is_gamma0[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices[v]
    }

    /// Inverse of the reference edge matrix; its rows are the gradients of
    /// the barycentric coordinates of vertices `1..=d`.
    pub fn reference_inverse(&self, e: usize) -> &DMatrix<f64> {
        &self.ref_inverse[e]
    }

    pub fn volume(&self, e: usize) -> f64 {
        self.volumes[e]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn region_volume(&self, region: Region) -> f64 {
        (0..self.n_elements()).filter(|&e| self.regions[e] == region).map(|e| self.volumes[e]).sum()
    }

    /// Vertices shared by a conductor and an insulator element.
    pub fn interface_vertices(&self) -> Vec<usize> {
        let mut cond = HashSet::new();
        let mut ins = HashSet::new();
        for (e, el) in self.elements.iter().enumerate() {
            let set = if self.regions[e] == Region::Conductor { &mut cond } else { &mut ins };
            set.extend(el.iter().copied());
        }
        let mut out: Vec<usize> = cond.intersection(&ins).copied().collect();
        out.sort_unstable();
        out
    }

    /// Facets on the conductor/insulator interface, each with the vertex of
    /// its conductor element that is not on the facet (to orient normals).
    pub fn interface_facets(&self) -> Vec<(Vec<usize>, usize)> {
        let mut owners: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            for f in facets_of(el) {
                owners.entry(f).or_default().push(e);
            }
        }
        let mut out = Vec::new();
        for (f, o) in owners {
            if let [a, b] = o.as_slice() {
                let (ra, rb) = (self.regions[*a], self.regions[*b]);
                if ra != rb {
                    let c = if ra == Region::Conductor { *a } else { *b };
                    let opposite = *self.elements[c].iter().find(|v| !f.contains(v)).unwrap();
                    out.push((f, opposite));
                }
            }
        }
        out.sort();
        out
    }

    /// Text mesh file with `DIMENSION`, `VERTICES`, `ELEMENTS` and `GAMMA0`
    /// sections. Coordinates use shortest round-trip formatting.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "DIMENSION {}", self.dim)?;
        writeln!(w, "VERTICES {}", self.vertices.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            let coords: Vec<String> = v[..self.dim].iter().map(|x| x.to_string()).collect();
            writeln!(w, "{i} {}", coords.join(" "))?;
        }
        writeln!(w, "ELEMENTS {}", self.elements.len())?;
        for (e, el) in self.elements.iter().enumerate() {
            let ids: Vec<String> = el.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{e} {} {}", ids.join(" "), self.regions[e].as_str())?;
        }
        writeln!(w, "GAMMA0 {}", self.gamma0.len())?;
        for v in &self.gamma0 {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = content_lines(r)?.into_iter();
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("missing {what}") });

        let (n, l) = next("DIMENSION")?;
        let dim: usize = section_count(&l, "DIMENSION", n)?;
        let (n, l) = next("VERTICES")?;
        let nv = section_count(&l, "VERTICES", n)?;
        let mut vertices = vec![[0.0; 3]; nv];
        let mut seen = vec![false; nv];
        for _ in 0..nv {
            let (n, l) = next("vertex row")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != dim + 1 {
                return Err(Error::Parse { line: n, msg: format!("vertex row needs index and {dim} coordinates") });
            }
            let i: usize = num(tok[0], n)?;
            if i >= nv || seen[i] {
                return Err(Error::Parse { line: n, msg: format!("bad or repeated vertex index {i}") });
            }
            seen[i] = true;
            for a in 0..dim {
                vertices[i][a] = num(tok[a + 1], n)?;
            }
        }
        let (n, l) = next("ELEMENTS")?;
        let ne = section_count(&l, "ELEMENTS", n)?;
        let mut elements = vec![Vec::new(); ne];
        let mut regions = vec![Region::Insulator; ne];
        let mut seen = vec![false; ne];
        for _ in 0..ne {
            let (n, l) = next("element row")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != dim + 3 {
                return Err(Error::Parse { line: n, msg: format!("element row needs index, {} vertices and a region", dim + 1) });
            }
            let e: usize = num(tok[0], n)?;
            if e >= ne || seen[e] {
                return Err(Error::Parse { line: n, msg: format!("bad or repeated element index {e}") });
            }
            seen[e] = true;
            elements[e] = tok[1..=dim + 1].iter().map(|t| num(t, n)).collect::<Result<_>>()?;
            regions[e] = Region::parse(tok[dim + 2])
                .ok_or_else(|| Error::Parse { line: n, msg: format!("unknown region `{}`", tok[dim + 2]) })?;
        }
        let (n, l) = next("GAMMA0")?;
        let ng = section_count(&l, "GAMMA0", n)?;
        let mut gamma0 = Vec::with_capacity(ng);
        while gamma0.len() < ng {
            let (n, l) = next("GAMMA0 index")?;
            for t in l.split_whitespace() {
                gamma0.push(num(t, n)?);
            }
        }
        if gamma0.len() != ng {
            return Err(Error::Parse { line: 0, msg: "GAMMA0 count mismatch".into() });
        }
        Self::new(dim, vertices, elements, regions, gamma0)
    }
}

/// Non-empty lines with `#` comments stripped, numbered from 1.
pub(crate) fn content_lines<R: BufRead>(r: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            out.push((i + 1, body.to_string()));
        }
    }
    Ok(out)
}

pub(crate) fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad number `{tok}`") })
}

fn section_count(line: &str, key: &str, n: usize) -> Result<usize> {
    let mut tok = line.split_whitespace();
    if tok.next() != Some(key) {
        return Err(Error::Parse { line: n, msg: format!("expected section `{key}`") });
    }
    let count = tok.next().ok_or_else(|| Error::Parse { line: n, msg: format!("`{key}` needs a count") })?;
    num(count, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_conductor_on_boundary_and_missing_conductor() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let err = ReferenceDomain::new(2, v.clone(), vec![vec![0, 1, 2]], vec![Region::Conductor], vec![0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
        let err = ReferenceDomain::new(2, v, vec![vec![0, 1, 2]], vec![Region::Insulator], vec![0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn rejects_inverted_and_degenerate_elements() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]];
        let err = ReferenceDomain::new(2, v.clone(), vec![vec![0, 2, 1]], vec![Region::Insulator], vec![0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
        let err = ReferenceDomain::new(2, v, vec![vec![0, 1, 3]], vec![Region::Insulator], vec![0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { element: 0 }));
    }

    #[test]
    fn mesh_file_round_trips() {
        let mesh = crate::deformation::demo::disk_in_disk(0).unwrap();
        let mut buf = Vec::new();
        mesh.write(&mut buf).unwrap();
        let back = ReferenceDomain::read(buf.as_slice()).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.elements(), mesh.elements());
        assert_eq!(back.gamma0(), mesh.gamma0());
        for e in 0..mesh.n_elements() {
            assert_eq!(back.region(e), mesh.region(e));
        }
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn reads_hand_written_mesh_with_comments() {
        let text = "\
# unit square, two triangles
DIMENSION 2
VERTICES 4
0 0 0
1 1 0
2 1 1
3 0 1
ELEMENTS 2
0 0 1 2 insulator
1 0 2 3 insulator
GAMMA0 2
0 1
";
        // No conductor: rejected after parsing.
        assert!(matches!(ReferenceDomain::read(text.as_bytes()), Err(Error::InvalidMesh(_))));
        let bad = text.replace("ELEMENTS 2", "ELEMENTZ 2");
        assert!(matches!(ReferenceDomain::read(bad.as_bytes()), Err(Error::Parse { .. })));
    }
}
