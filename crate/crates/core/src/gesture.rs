//! Per-frame gesture classification and the debounced mouse-event state machine.
//!
//! The number of detected regions selects the gesture:
//!
//! | regions | class                    | action                |
//! |---------|--------------------------|-----------------------|
//! | 0       | `Empty`                  | nothing               |
//! | 1       | `Point`                  | move the cursor       |
//! | 2       | `PairFar` / `PairNear`   | left / right click    |
//! | 3       | `Triple`                 | drag                  |
//! | 4       | `Quad`                   | double click          |
//! | > 4     | `Overflow`               | nothing               |
//!
//! Two regions are split by the Euclidean distance between their centroids:
//! strictly greater than `click_split` is a left click.
//!
//! Cursor motion (`Point`, and `Triple` once a drag is active) is applied on
//! every frame. Everything else is debounced: a class becomes *stable* after
//! `stable_frames` consecutive frames, click-kind events fire once when their
//! class becomes stable, and a click kind re-arms only after some other class
//! has become stable. A drag starts when `Triple` becomes stable and ends when
//! any other class does.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::mapping::{smooth, Dims, PixelPoint, ScreenPoint};
use crate::segment::Roi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureTag {
    Empty,
    Point,
    PairFar,
    PairNear,
    Triple,
    Quad,
    Overflow,
}

impl GestureTag {
    pub const ALL: [GestureTag; 7] = [
        GestureTag::Empty,
        GestureTag::Point,
        GestureTag::PairFar,
        GestureTag::PairNear,
        GestureTag::Triple,
        GestureTag::Quad,
        GestureTag::Overflow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GestureTag::Empty => "empty",
            GestureTag::Point => "point",
            GestureTag::PairFar => "pair_far",
            GestureTag::PairNear => "pair_near",
            GestureTag::Triple => "triple",
            GestureTag::Quad => "quad",
            GestureTag::Overflow => "overflow",
        }
    }

    pub fn from_name(s: &str) -> Option<GestureTag> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Number of regions the class stands for; `None` for `Overflow`.
    pub fn region_count(self) -> Option<usize> {
        match self {
            GestureTag::Empty => Some(0),
            GestureTag::Point => Some(1),
            GestureTag::PairFar | GestureTag::PairNear => Some(2),
            GestureTag::Triple => Some(3),
            GestureTag::Quad => Some(4),
            GestureTag::Overflow => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureClass {
    pub tag: GestureTag,
    /// Mean of the region centroids; absent for `Empty` and `Overflow`.
    pub anchor: Option<PixelPoint>,
}

pub fn classify_frame(rois: &[Roi], cfg: &EngineConfig) -> GestureClass {
    let tag = match rois.len() {
        0 => GestureTag::Empty,
        1 => GestureTag::Point,
        2 => {
            if rois[0].centroid.distance(&rois[1].centroid) > cfg.click_split() {
                GestureTag::PairFar
            } else {
                GestureTag::PairNear
            }
        }
        3 => GestureTag::Triple,
        4 => GestureTag::Quad,
        _ => GestureTag::Overflow,
    };
    let anchor = match tag {
        GestureTag::Empty | GestureTag::Overflow => None,
        _ => {
            let n = rois.len() as f64;
            let (sx, sy) = rois
                .iter()
                .fold((0.0, 0.0), |(sx, sy), r| (sx + r.centroid.x, sy + r.centroid.y));
            Some(PixelPoint::new(sx / n, sy / n))
        }
    };
    GestureClass { tag, anchor }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Move,
    LeftClick,
    RightClick,
    DoubleClick,
    DragStart,
    DragMove,
    DragEnd,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::Move,
        EventKind::LeftClick,
        EventKind::RightClick,
        EventKind::DoubleClick,
        EventKind::DragStart,
        EventKind::DragMove,
        EventKind::DragEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Move => "move",
            EventKind::LeftClick => "left_click",
            EventKind::RightClick => "right_click",
            EventKind::DoubleClick => "double_click",
            EventKind::DragStart => "drag_start",
            EventKind::DragMove => "drag_move",
            EventKind::DragEnd => "drag_end",
        }
    }

    pub fn is_motion(self) -> bool {
        matches!(self, EventKind::Move | EventKind::DragMove)
    }
}

/// A mouse event in integer screen pixels. Serializes as
/// `{"kind":"move","x":799,"y":450,"frame":0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MouseEvent {
    pub kind: EventKind,
    pub x: i32,
    pub y: i32,
    pub frame: u64,
}

impl MouseEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serialization is infallible")
    }

    pub fn from_line(line: &str) -> Option<MouseEvent> {
        serde_json::from_str(line).ok()
    }
}

/// Renders events one record per line, each terminated by `\n`.
pub fn format_events(events: &[MouseEvent]) -> String {
    events.iter().map(|e| e.to_line() + "\n").collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trigger {
    Left,
    Right,
    Double,
    Drag,
}

impl Trigger {
    const ALL: [Trigger; 4] = [Trigger::Left, Trigger::Right, Trigger::Double, Trigger::Drag];

    fn tag(self) -> GestureTag {
        match self {
            Trigger::Left => GestureTag::PairFar,
            Trigger::Right => GestureTag::PairNear,
            Trigger::Double => GestureTag::Quad,
            Trigger::Drag => GestureTag::Triple,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub cursor: ScreenPoint,
    /// Whether `cursor` came from a mapped anchor (smoothing has history).
    pub tracking: bool,
    /// Current run of identical raw classes and its length.
    pub candidate: Option<(GestureTag, u32)>,
    /// Last class that persisted for `stable_frames` frames.
    pub stable: GestureTag,
    /// Indexed by trigger: left, right, double, drag.
    pub armed: [bool; 4],
    pub dragging: bool,
    pub last_frame: Option<u64>,
}

impl EngineState {
    /// Fresh state with the cursor at the screen center.
    pub fn new(screen: Dims) -> Self {
        EngineState {
            cursor: ScreenPoint::new(screen.width as f64 / 2.0, screen.height as f64 / 2.0),
            tracking: false,
            candidate: None,
            stable: GestureTag::Empty,
            armed: [true; 4],
            dragging: false,
            last_frame: None,
        }
    }

    pub fn reset(&self, screen: Dims) -> Self {
        Self::new(screen)
    }
}

/// Advances the state machine by one frame.
pub fn step(
    state: &EngineState,
    g: &GestureClass,
    frame: u64,
    cfg: &EngineConfig,
) -> Result<(EngineState, Vec<MouseEvent>)> {
    if let Some(prev) = state.last_frame {
        if frame <= prev {
            return Err(Error::Sequence { prev, got: frame });
        }
    }
    let mut s = state.clone();
    s.last_frame = Some(frame);

    let run = match s.candidate {
        Some((tag, n)) if tag == g.tag => n.saturating_add(1),
        _ => 1,
    };
    s.candidate = Some((g.tag, run));
    if run >= cfg.stable_frames {
        s.stable = g.tag;
    }
    for t in Trigger::ALL {
        if s.stable != t.tag() {
            s.armed[t as usize] = true;
        }
    }

    let screen = cfg.screen;
    let event_at = |kind, cursor: ScreenPoint| {
        let (x, y) = cursor.to_pixel(screen);
        MouseEvent { kind, x, y, frame }
    };
    let mut events = Vec::with_capacity(2);

    // Click-kind: at most one per frame, drag_end takes precedence.
    let mut drag_started = false;
    if s.dragging && s.stable != GestureTag::Triple {
        s.dragging = false;
        events.push(event_at(EventKind::DragEnd, s.cursor));
    } else if g.tag == s.stable && run >= cfg.stable_frames {
        let fired = Trigger::ALL
            .into_iter()
            .find(|t| t.tag() == g.tag && s.armed[*t as usize]);
        if let Some(t) = fired {
            s.armed[t as usize] = false;
            let kind = match t {
                Trigger::Left => EventKind::LeftClick,
                Trigger::Right => EventKind::RightClick,
                Trigger::Double => EventKind::DoubleClick,
                Trigger::Drag => {
                    s.dragging = true;
                    drag_started = true;
                    EventKind::DragStart
                }
            };
            events.push(event_at(kind, s.cursor));
        }
    }

    // Motion-kind.
    let moves_cursor = match g.tag {
        GestureTag::Point => true,
        GestureTag::Triple => s.dragging && !drag_started,
        _ => false,
    };
    if let (true, Some(anchor)) = (moves_cursor, g.anchor) {
        let mapped = cfg.pointer_map().map(anchor)?;
        let prev = s.tracking.then_some(s.cursor);
        s.cursor = smooth(prev, mapped, cfg.smoothing_alpha)?;
        s.tracking = true;
        let kind = if s.dragging { EventKind::DragMove } else { EventKind::Move };
        events.push(event_at(kind, s.cursor));
    }

    Ok((s, events))
}

/// Owns a state and its configuration; processes frames in order.
#[derive(Debug, Clone)]
pub struct GestureEngine {
    cfg: EngineConfig,
    state: EngineState,
}

impl GestureEngine {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let state = EngineState::new(cfg.screen);
        Ok(GestureEngine { cfg, state })
    }

    pub fn with_state(cfg: EngineConfig, state: EngineState) -> Result<Self> {
        cfg.validate()?;
        Ok(GestureEngine { cfg, state })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = self.state.reset(self.cfg.screen);
    }

    pub fn step_class(&mut self, g: &GestureClass, frame: u64) -> Result<Vec<MouseEvent>> {
        let (next, events) = step(&self.state, g, frame, &self.cfg)?;
        self.state = next;
        Ok(events)
    }

    pub fn step_rois(&mut self, rois: &[Roi], frame: u64) -> Result<Vec<MouseEvent>> {
        let g = classify_frame(rois, &self.cfg);
        self.step_class(&g, frame)
    }
}

/// Folds `step` over `roi_frames` from a fresh state; frame `i` gets index `i`.
pub fn run_sequence(roi_frames: &[Vec<Roi>], cfg: &EngineConfig) -> Result<Vec<MouseEvent>> {
    let mut engine = GestureEngine::new(cfg.clone())?;
    let mut events = Vec::new();
    for (i, rois) in roi_frames.iter().enumerate() {
        events.extend(engine.step_rois(rois, i as u64)?);
    }
    Ok(events)
}
