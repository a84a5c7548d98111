//! Pants graphs, their realization as glued right-angled hexagons, and the
//! collar decomposition.

use serde::{Deserialize, Serialize};

use crate::collar::{self, Collar};
use crate::error::{Error, Result};
use crate::hypgeom::{self, Hexagon, HexagonChart, HPoint};

/// One cuff slot of one pants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotRef {
    pub pants: usize,
    pub slot: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gluing {
    pub a: SlotRef,
    pub b: SlotRef,
    pub length: f64,
}

/// Block structure of the chain family: pants `2j` and `2j + 1` form block
/// `j`; blocks are linked cyclically through their short cuffs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainLayout {
    pub blocks: usize,
    pub epsilon: f64,
}

impl ChainLayout {
    pub fn block_of_pants(&self, pants: usize) -> usize {
        pants / 2
    }

    /// Gluing joining block `j` to block `j + 1 (mod n)`.
    pub fn link_gluing(&self, j: usize) -> usize {
        3 * j + 2
    }

    /// Blocks on either side of a link gluing, if it is one.
    pub fn link_of_gluing(&self, g: usize) -> Option<(usize, usize)> {
        (g % 3 == 2 && g / 3 < self.blocks).then(|| (g / 3, (g / 3 + 1) % self.blocks))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PantsGraph {
    pub labels: Vec<String>,
    pub gluings: Vec<Gluing>,
    pub layout: Option<ChainLayout>,
    slot_index: Vec<[(usize, Side); 3]>,
}

/// Which end of a gluing a slot is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl PantsGraph {
    pub fn new(labels: Vec<String>, gluings: Vec<Gluing>) -> Result<Self> {
        let n = labels.len();
        if n < 2 || n % 2 == 1 {
            return Err(Error::Genus(n));
        }
        let mut index: Vec<[Option<(usize, Side)>; 3]> = vec![[None; 3]; n];
        for (g, gl) in gluings.iter().enumerate() {
            if !(gl.length > 0.0) || !gl.length.is_finite() {
                return Err(Error::InvalidLength(gl.length));
            }
            for (s, side) in [(gl.a, Side::A), (gl.b, Side::B)] {
                if s.pants >= n || s.slot >= 3 {
                    return Err(Error::InvalidGraph(format!(
                        "gluing {g} refers to missing slot ({}, {})",
                        s.pants, s.slot
                    )));
                }
                let cell = &mut index[s.pants][s.slot];
                if cell.is_some() {
                    return Err(Error::InvalidGraph(format!(
                        "slot ({}, {}) is glued twice",
                        s.pants, s.slot
                    )));
                }
                *cell = Some((g, side));
            }
        }
        let mut slot_index = Vec::with_capacity(n);
        for (p, slots) in index.iter().enumerate() {
            let mut row = [(0, Side::A); 3];
            for (k, s) in slots.iter().enumerate() {
                row[k] = s.ok_or_else(|| {
                    Error::IncompleteGluing(format!("slot {k} of pants {p} ({}) is unglued", labels[p]))
                })?;
            }
            slot_index.push(row);
        }
        Ok(Self {
            labels,
            gluings,
            layout: None,
            slot_index,
        })
    }

    pub fn pants_count(&self) -> usize {
        self.labels.len()
    }

    pub fn genus(&self) -> usize {
        1 + self.labels.len() / 2
    }

    /// The gluing that uses a slot, and the side of it.
    pub fn gluing_of(&self, s: SlotRef) -> (usize, Side) {
        self.slot_index[s.pants][s.slot]
    }

    pub fn cuff_length(&self, s: SlotRef) -> f64 {
        self.gluings[self.gluing_of(s).0].length
    }

    pub fn cuff_lengths(&self, pants: usize) -> [f64; 3] {
        [0, 1, 2].map(|slot| self.cuff_length(SlotRef { pants, slot }))
    }
}

/// Two pants glued along all three cuffs.
pub fn double_pants(lengths: [f64; 3]) -> Result<PantsGraph> {
    let gluings = (0..3)
        .map(|k| Gluing {
            a: SlotRef { pants: 0, slot: k },
            b: SlotRef { pants: 1, slot: k },
            length: lengths[k],
        })
        .collect();
    PantsGraph::new(vec!["P0".into(), "P1".into()], gluings)
}

/// The chain of `n` blocks, each two `(1, 1, ε)` pants glued along their unit
/// cuffs, with consecutive blocks joined along the `ε` cuffs.
pub fn sharpness_family(n: usize, epsilon: f64) -> Result<PantsGraph> {
    if n < 2 {
        return Err(Error::Precondition(format!("chain needs n >= 2, got {n}")));
    }
    if !(epsilon > 0.0) || epsilon >= collar::short_length() {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
        });
    }
    let mut labels = Vec::with_capacity(2 * n);
    let mut gluings = Vec::with_capacity(3 * n);
    for j in 0..n {
        labels.push(format!("Y{j}.1"));
        labels.push(format!("Y{j}.2"));
        let (p, q) = (2 * j, 2 * j + 1);
        for slot in 0..2 {
            gluings.push(Gluing {
                a: SlotRef { pants: p, slot },
                b: SlotRef { pants: q, slot },
                length: 1.0,
            });
        }
        gluings.push(Gluing {
            a: SlotRef { pants: q, slot: 2 },
            b: SlotRef {
                pants: 2 * ((j + 1) % n),
                slot: 2,
            },
            length: epsilon,
        });
    }
    let mut g = PantsGraph::new(labels, gluings)?;
    g.layout = Some(ChainLayout { blocks: n, epsilon });
    Ok(g)
}

/// A pants realized as two mirror-image right-angled hexagons.
#[derive(Clone, Debug)]
pub struct PantsBlock {
    pub lengths: [f64; 3],
    pub hexagon: Hexagon,
    pub chart: HexagonChart,
    pub incenter: HPoint,
}

impl PantsBlock {
    /// Seam between slots `k` and `k + 1`.
    pub fn seam(&self, k: usize) -> f64 {
        self.hexagon.seam_between(k)
    }

    /// Area of the pants, two right-angled hexagons of area π each.
    pub fn area(&self) -> f64 {
        2.0 * std::f64::consts::PI
    }
}

pub fn build_pants(l1: f64, l2: f64, l3: f64) -> Result<PantsBlock> {
    let hexagon = hypgeom::hexagon_seams(0.5 * l1, 0.5 * l2, 0.5 * l3)?;
    let chart = hexagon.chart();
    let incenter = chart.incenter()?;
    Ok(PantsBlock {
        lengths: [l1, l2, l3],
        hexagon,
        chart,
        incenter,
    })
}

#[derive(Clone, Debug)]
pub struct SurfaceModel {
    pub graph: PantsGraph,
    pub blocks: Vec<PantsBlock>,
    pub collars: Vec<Collar>,
    /// Collar index of each gluing, if its cuff is short.
    pub cuff_collar: Vec<Option<usize>>,
    pub genus: usize,
    pub volume: f64,
}

pub fn assemble_surface(graph: PantsGraph) -> Result<SurfaceModel> {
    let blocks = (0..graph.pants_count())
        .map(|p| {
            let l = graph.cuff_lengths(p);
            build_pants(l[0], l[1], l[2])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut collars = Vec::new();
    let mut cuff_collar = Vec::with_capacity(graph.gluings.len());
    for (g, gl) in graph.gluings.iter().enumerate() {
        if gl.length <= collar::short_length() {
            cuff_collar.push(Some(collars.len()));
            collars.push(Collar::new(gl.length, g)?);
        } else {
            cuff_collar.push(None);
        }
    }
    let genus = graph.genus();
    let volume = 2.0 * std::f64::consts::PI * graph.pants_count() as f64;
    Ok(SurfaceModel {
        graph,
        blocks,
        collars,
        cuff_collar,
        genus,
        volume,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollarAudit {
    /// Smallest `seam − W_i − W_j` over all seams.
    pub seam_margin: f64,
    /// Smallest `altitude − W_i` over all collared slots.
    pub altitude_margin: f64,
}

impl CollarAudit {
    pub fn passed(&self) -> bool {
        self.seam_margin >= -1e-12 && self.altitude_margin >= -1e-12
    }
}

impl SurfaceModel {
    pub fn collar_of_slot(&self, s: SlotRef) -> Option<&Collar> {
        let (g, _) = self.graph.gluing_of(s);
        self.cuff_collar[g].map(|c| &self.collars[c])
    }

    fn width(&self, s: SlotRef) -> f64 {
        self.collar_of_slot(s).map_or(0.0, |c| c.half_width)
    }

    /// Disjointness check in coordinates: two collars entering a pants must
    /// fit along the seam between them, and each collar must stay below the
    /// opposite seam so it does not overlap itself.
    pub fn collar_audit(&self) -> Result<CollarAudit> {
        let mut seam_margin = f64::INFINITY;
        let mut altitude_margin = f64::INFINITY;
        for (p, b) in self.blocks.iter().enumerate() {
            let w = [0, 1, 2].map(|slot| self.width(SlotRef { pants: p, slot }));
            for k in 0..3 {
                seam_margin = seam_margin.min(b.seam(k) - w[k] - w[(k + 1) % 3]);
                if w[k] > 0.0 {
                    altitude_margin = altitude_margin.min(b.chart.altitude(k)? - w[k]);
                }
            }
        }
        Ok(CollarAudit {
            seam_margin,
            altitude_margin,
        })
    }
}
