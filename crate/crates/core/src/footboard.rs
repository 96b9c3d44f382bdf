//! Pedal board model: tracked feet to pedal presses, and the minimap shown
//! to the operator.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Pedal identifiers. Variant order is the lexicographic order of the
/// serialized names, which is the boundary tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PedalId {
    Camera,
    Clutch,
    Energy1,
    Energy2,
    Energy3,
    Energy4,
    Switch,
    ThirtyDegree,
}

impl PedalId {
    pub const ALL: [PedalId; 8] = [
        PedalId::Camera,
        PedalId::Clutch,
        PedalId::Energy1,
        PedalId::Energy2,
        PedalId::Energy3,
        PedalId::Energy4,
        PedalId::Switch,
        PedalId::ThirtyDegree,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootSample {
    pub side: Side,
    /// Board-plane position, meters.
    pub position: Vector2<f64>,
    /// Height above the board, meters.
    pub height: f64,
    #[serde(default = "default_true")]
    pub valid: bool,
}

fn default_true() -> bool {
    true
}

impl FootSample {
    pub fn at(side: Side, x: f64, y: f64, height: f64) -> Self {
        Self {
            side,
            position: Vector2::new(x, y),
            height,
            valid: true,
        }
    }
}

/// Closed axis-aligned rectangle on the board plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min: Vector2::new(min_x, min_y),
            max: Vector2::new(max_x, max_y),
        }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vector2<f64> {
        (self.min + self.max) * 0.5
    }

    fn interiors_overlap(&self, other: &Rect) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedalRegion {
    pub id: PedalId,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedalLayout {
    /// Board width and depth, meters.
    pub board: Vector2<f64>,
    pub press_height: f64,
    pub pedals: Vec<PedalRegion>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("press_height must be positive")]
    PressHeight,
    #[error("board dimensions must be positive")]
    Board,
    #[error("pedal {0:?} appears more than once")]
    Duplicate(PedalId),
    #[error("pedal {0:?} has an empty or inverted rectangle")]
    Degenerate(PedalId),
    #[error("pedals {0:?} and {1:?} overlap")]
    Overlap(PedalId, PedalId),
}

impl Default for PedalLayout {
    /// Two rows of four pedals on a 0.6 × 0.4 m board: clutch, camera,
    /// 30° and switch at the front, the energy pedals behind.
    fn default() -> Self {
        let cell = |col: usize, row: usize| {
            let x0 = col as f64 * 0.15;
            let y0 = row as f64 * 0.20;
            Rect::new(x0 + 0.01, y0 + 0.02, x0 + 0.14, y0 + 0.18)
        };
        let front = [
            PedalId::Clutch,
            PedalId::Camera,
            PedalId::ThirtyDegree,
            PedalId::Switch,
        ];
        let back = [
            PedalId::Energy1,
            PedalId::Energy2,
            PedalId::Energy3,
            PedalId::Energy4,
        ];
        let mut pedals = Vec::new();
        for (col, id) in front.into_iter().enumerate() {
            pedals.push(PedalRegion {
                id,
                rect: cell(col, 0),
            });
        }
        for (col, id) in back.into_iter().enumerate() {
            pedals.push(PedalRegion {
                id,
                rect: cell(col, 1),
            });
        }
        Self {
            board: Vector2::new(0.6, 0.4),
            press_height: 0.02,
            pedals,
        }
    }
}

impl PedalLayout {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if !(self.press_height > 0.0) {
            return Err(LayoutError::PressHeight);
        }
        if !(self.board.x > 0.0 && self.board.y > 0.0) {
            return Err(LayoutError::Board);
        }
        for (i, a) in self.pedals.iter().enumerate() {
            if !(a.rect.min.x < a.rect.max.x && a.rect.min.y < a.rect.max.y) {
                return Err(LayoutError::Degenerate(a.id));
            }
            for b in &self.pedals[i + 1..] {
                if a.id == b.id {
                    return Err(LayoutError::Duplicate(a.id));
                }
                if a.rect.interiors_overlap(&b.rect) {
                    return Err(LayoutError::Overlap(a.id, b.id));
                }
            }
        }
        Ok(())
    }

    pub fn region(&self, id: PedalId) -> Option<&PedalRegion> {
        self.pedals.iter().find(|p| p.id == id)
    }

    /// The pedal whose region contains `p`; on a shared boundary the
    /// smallest id wins.
    pub fn pedal_at(&self, p: &Vector2<f64>) -> Option<PedalId> {
        self.pedals
            .iter()
            .filter(|r| r.rect.contains(p))
            .map(|r| r.id)
            .min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedalEdge {
    pub side: Side,
    pub pedal: PedalId,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PedalState {
    /// Indexed by `PedalId::index`.
    pub pressed: [bool; 8],
    /// Pedal under each foot (left, right) while pressing.
    pub feet: [Option<PedalId>; 2],
    /// Press transitions that happened this tick.
    pub edges: Vec<PedalEdge>,
    /// Some foot reported invalid tracking this tick.
    pub tracking_warning: bool,
}

impl PedalState {
    pub fn is_pressed(&self, id: PedalId) -> bool {
        self.pressed[id.index()]
    }

    pub fn pressed_edge(&self, id: PedalId) -> bool {
        self.edges.iter().any(|e| e.pedal == id)
    }

    pub fn pressed_ids(&self) -> Vec<PedalId> {
        PedalId::ALL
            .into_iter()
            .filter(|id| self.is_pressed(*id))
            .collect()
    }

    /// Copy with `id` held down, without generating an edge.
    pub fn with_forced(&self, id: PedalId) -> PedalState {
        let mut s = self.clone();
        s.pressed[id.index()] = true;
        s
    }
}

pub fn detect_pedals(feet: &[FootSample], layout: &PedalLayout, previous: &PedalState) -> PedalState {
    let mut state = PedalState::default();
    for foot in feet {
        if !foot.valid {
            state.tracking_warning = true;
            continue;
        }
        if foot.height >= layout.press_height {
            continue;
        }
        if let Some(id) = layout.pedal_at(&foot.position) {
            state.pressed[id.index()] = true;
            state.feet[foot.side.index()] = Some(id);
        }
    }
    for side in Side::BOTH {
        if let Some(id) = state.feet[side.index()] {
            let new_press = !previous.is_pressed(id) && !state.edges.iter().any(|e| e.pedal == id);
            if new_press {
                state.edges.push(PedalEdge { side, pedal: id });
            }
        }
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IconState {
    Normal,
    Black,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedalIcon {
    pub id: PedalId,
    /// Normalized map coordinates in `[0, 1]²`.
    pub rect: Rect,
    pub state: IconState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootIcon {
    pub side: Side,
    pub position: Vector2<f64>,
    pub scale: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimapModel {
    pub pedals: Vec<PedalIcon>,
    pub feet: Vec<FootIcon>,
    pub click_event: bool,
}

/// Builds the minimap for this tick. Board coordinates are normalized by
/// the board size; a foot icon scales by `1 + gain · height`.
pub fn minimap(feet: &[FootSample], layout: &PedalLayout, pedals: &PedalState, gain: f64) -> MinimapModel {
    let norm = |p: &Vector2<f64>| Vector2::new(p.x / layout.board.x, p.y / layout.board.y);
    let pedal_icons = layout
        .pedals
        .iter()
        .map(|r| PedalIcon {
            id: r.id,
            rect: Rect {
                min: norm(&r.rect.min),
                max: norm(&r.rect.max),
            },
            state: if pedals.is_pressed(r.id) {
                IconState::Black
            } else {
                IconState::Normal
            },
        })
        .collect();
    let foot_icons = feet
        .iter()
        .map(|f| FootIcon {
            side: f.side,
            position: norm(&f.position),
            scale: if f.valid {
                1.0 + gain * f.height.max(0.0)
            } else {
                1.0
            },
            visible: f.valid,
        })
        .collect();
    MinimapModel {
        pedals: pedal_icons,
        feet: foot_icons,
        click_event: !pedals.edges.is_empty(),
    }
}
