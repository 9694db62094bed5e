//! Structured finite-element grids of unit-sized elements.
//!
//! Nodes are numbered deterministically: column-major with the y index
//! fastest in 2D (`id = i*(nely+1) + j`) and the z index fastest in 3D
//! (`id = (i*(nely+1) + j)*(nelz+1) + k`). Each node carries 2 (2D) or
//! 3 (3D) displacement components, stored consecutively.
//!
//! The loading axis is y in 2D and z in 3D: the "bottom" interface is the
//! y-min row (z-min face) and the "top" interface the y-max row (z-max
//! face).

use crate::error::{Error, Result};

/// Structured grid of bilinear quadrilaterals (2D) or trilinear hexahedra
/// (3D) with unit element size.
#[derive(Debug, Clone)]
pub struct Mesh {
    nelx: usize,
    nely: usize,
    nelz: Option<usize>,
    n_nodes: usize,
    n_dofs: usize,
    interface_bottom: Vec<usize>,
    interface_top: Vec<usize>,
}

impl Mesh {
    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    /// Element count along z; `None` for 2D meshes.
    pub fn nelz(&self) -> Option<usize> {
        self.nelz
    }

    pub fn is_3d(&self) -> bool {
        self.nelz.is_some()
    }

    /// Displacement components per node: 2 in 2D, 3 in 3D.
    pub fn dofs_per_node(&self) -> usize {
        if self.is_3d() {
            3
        } else {
            2
        }
    }

    /// Total number of elements N.
    pub fn n_elements(&self) -> usize {
        self.nelx * self.nely * self.nelz.unwrap_or(1)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Total number of nodal displacement components n.
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Node index from grid coordinates.
    pub fn node_id(&self, i: usize, j: usize, k: usize) -> usize {
        match self.nelz {
            None => i * (self.nely + 1) + j,
            Some(nelz) => (i * (self.nely + 1) + j) * (nelz + 1) + k,
        }
    }

    /// Grid coordinates of a node index (inverse of [`Mesh::node_id`]).
    pub fn node_coords(&self, node: usize) -> (usize, usize, usize) {
        match self.nelz {
            None => (node / (self.nely + 1), node % (self.nely + 1), 0),
            Some(nelz) => {
                let k = node % (nelz + 1);
                let rest = node / (nelz + 1);
                (rest / (self.nely + 1), rest % (self.nely + 1), k)
            }
        }
    }

    /// Element index from element grid coordinates.
    pub fn element_id(&self, ex: usize, ey: usize, ez: usize) -> usize {
        match self.nelz {
            None => ex * self.nely + ey,
            Some(nelz) => (ex * self.nely + ey) * nelz + ez,
        }
    }

    /// Element grid coordinates from an element index.
    pub fn element_coords(&self, e: usize) -> (usize, usize, usize) {
        match self.nelz {
            None => (e / self.nely, e % self.nely, 0),
            Some(nelz) => {
                let ez = e % nelz;
                let rest = e / nelz;
                (rest / self.nely, rest % self.nely, ez)
            }
        }
    }

    /// Element center coordinates (elements have unit size).
    pub fn element_center(&self, e: usize) -> (f64, f64, f64) {
        let (ex, ey, ez) = self.element_coords(e);
        (ex as f64 + 0.5, ey as f64 + 0.5, ez as f64 + 0.5)
    }

    /// Node indices of element `e` in local order.
    ///
    /// 2D: counterclockwise from the lower-left corner. 3D: the z-min quad
    /// counterclockwise, then the z-max quad in matching order.
    pub fn element_nodes(&self, e: usize) -> Result<Vec<usize>> {
        if e >= self.n_elements() {
            return Err(Error::InvalidArgument(format!(
                "element index {e} out of range (N = {})",
                self.n_elements()
            )));
        }
        let (ex, ey, ez) = self.element_coords(e);
        let nodes = match self.nelz {
            None => vec![
                self.node_id(ex, ey, 0),
                self.node_id(ex + 1, ey, 0),
                self.node_id(ex + 1, ey + 1, 0),
                self.node_id(ex, ey + 1, 0),
            ],
            Some(_) => vec![
                self.node_id(ex, ey, ez),
                self.node_id(ex + 1, ey, ez),
                self.node_id(ex + 1, ey + 1, ez),
                self.node_id(ex, ey + 1, ez),
                self.node_id(ex, ey, ez + 1),
                self.node_id(ex + 1, ey, ez + 1),
                self.node_id(ex + 1, ey + 1, ez + 1),
                self.node_id(ex, ey + 1, ez + 1),
            ],
        };
        Ok(nodes)
    }

    /// Global displacement-component indices of element `e`, ordered per
    /// local node with components consecutive (u, v[, w]).
    pub fn element_dof_map(&self, e: usize) -> Result<Vec<usize>> {
        let m = self.dofs_per_node();
        let nodes = self.element_nodes(e)?;
        let mut dofs = Vec::with_capacity(nodes.len() * m);
        for node in nodes {
            for c in 0..m {
                dofs.push(node * m + c);
            }
        }
        Ok(dofs)
    }

    /// Nodes on the fixed (y-min / z-min) interface, ascending.
    pub fn interface_bottom(&self) -> &[usize] {
        &self.interface_bottom
    }

    /// Nodes on the prescribed (y-max / z-max) interface, ascending.
    pub fn interface_top(&self) -> &[usize] {
        &self.interface_top
    }
}

/// Builds the structured grid. `nelz = None` gives a 2D mesh.
pub fn build_mesh(nelx: usize, nely: usize, nelz: Option<usize>) -> Result<Mesh> {
    if nelx == 0 || nely == 0 || nelz == Some(0) {
        return Err(Error::InvalidArgument(format!(
            "element counts must be positive (got {nelx} x {nely}{})",
            nelz.map(|z| format!(" x {z}")).unwrap_or_default()
        )));
    }
    let n_nodes = (nelx + 1)
        .checked_mul(nely + 1)
        .and_then(|v| v.checked_mul(nelz.map_or(1, |z| z + 1)))
        .ok_or_else(|| Error::InvalidArgument("mesh dimensions overflow".into()))?;
    let dofs_per_node = if nelz.is_some() { 3 } else { 2 };
    let n_dofs = n_nodes
        .checked_mul(dofs_per_node)
        .ok_or_else(|| Error::InvalidArgument("mesh dimensions overflow".into()))?;

    let mut mesh = Mesh {
        nelx,
        nely,
        nelz,
        n_nodes,
        n_dofs,
        interface_bottom: Vec::new(),
        interface_top: Vec::new(),
    };
    let (bottom, top) = interface_sets(&mesh);
    mesh.interface_bottom = bottom;
    mesh.interface_top = top;
    Ok(mesh)
}

/// Node sets on the loading-axis extremes: (bottom, top). Corner nodes of
/// the extreme rows/faces are interface nodes.
pub fn interface_sets(mesh: &Mesh) -> (Vec<usize>, Vec<usize>) {
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    match mesh.nelz {
        None => {
            for i in 0..=mesh.nelx {
                bottom.push(mesh.node_id(i, 0, 0));
                top.push(mesh.node_id(i, mesh.nely, 0));
            }
        }
        Some(nelz) => {
            for i in 0..=mesh.nelx {
                for j in 0..=mesh.nely {
                    bottom.push(mesh.node_id(i, j, 0));
                    top.push(mesh.node_id(i, j, nelz));
                }
            }
        }
    }
    bottom.sort_unstable();
    top.sort_unstable();
    (bottom, top)
}
