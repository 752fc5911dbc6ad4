//! Grid kitchen with uncertain obstacles in a "shadow" region.
//!
//! A joint state is `(robot cell, obstacle placement, hand, collision)`. The
//! obstacle placement is one of the `C(|shadow|, M)` subsets of shadow cells
//! and never changes. States holding the cup or in collision are absorbing.
//!
//! Actions: four moves (fail with `p_fail`, leaving the state unchanged;
//! entering an occupied cell sets the collision flag), four looks at the
//! adjacent cell (noisy `o_pos`/`o_neg`), and the two pick-up actions, which
//! follow the three-state pick-up sub-model when the robot stands on the
//! storage cell and do nothing elsewhere. Moves emit the uninformative
//! `o_null`. Pick-ups emit the sub-model's observations in every state, so a
//! hidden collision elsewhere is not revealed by the gripper.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use num_traits::{One, Zero};

use crate::belief::Belief;
use crate::error::ModelError;
use crate::model::Pomdp;
use crate::objective::{above, below, SafeReachObjective};
use crate::rational::{format_prob, prob, Prob};

use super::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.x, self.y)
    }
}

impl std::str::FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s
            .split_once([',', '_'])
            .ok_or_else(|| format!("cell `{s}` is not `x,y`"))?;
        Ok(Cell::new(
            x.trim().parse().map_err(|_| format!("bad x in `{s}`"))?,
            y.trim().parse().map_err(|_| format!("bad y in `{s}`"))?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    South,
    West,
    East,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::West, Direction::East];

    fn suffix(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::West => "west",
            Direction::East => "east",
        }
    }
}

pub const POS: usize = 0;
pub const NEG: usize = 1;
pub const NULL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KitchenConfig {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<Cell>,
    pub shadow_cells: Vec<Cell>,
    /// The cell the robot must stand on to pick up the cup.
    pub storage_cell: Cell,
    pub start_cell: Cell,
    pub obstacles: usize,
    pub p_fail: Prob,
    pub p_fp: Prob,
    pub p_fn: Prob,
    /// Goal: `P(holding) > 1 - delta_goal`.
    pub delta_goal: Prob,
    /// Safety: `P(collision) < delta_safe`.
    pub delta_safe: Prob,
    /// Make pick-up available only when the whole belief is on the storage
    /// cell (instead of a no-op elsewhere).
    pub restrict_pickup: bool,
}

impl Default for KitchenConfig {
    /// A 3×2 kitchen: start bottom-left, storage bottom-right, and one
    /// obstacle in one of the two middle-column cells.
    fn default() -> Self {
        Self {
            width: 3,
            height: 2,
            walls: Vec::new(),
            shadow_cells: vec![Cell::new(1, 0), Cell::new(1, 1)],
            storage_cell: Cell::new(2, 0),
            start_cell: Cell::new(0, 0),
            obstacles: 1,
            p_fail: prob(1, 20),
            p_fp: prob(1, 50),
            p_fn: prob(1, 20),
            delta_goal: prob(1, 5),
            delta_safe: prob(1, 5),
            restrict_pickup: false,
        }
    }
}

impl KitchenConfig {
    pub fn num_cells(&self) -> usize {
        self.width * self.height - self.walls.len()
    }

    fn on_grid(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    fn free(&self, c: Cell) -> bool {
        self.on_grid(c) && !self.walls.contains(&c)
    }

    fn neighbor(&self, c: Cell, d: Direction) -> Option<Cell> {
        let n = match d {
            Direction::North => Cell::new(c.x, c.y + 1),
            Direction::South => Cell::new(c.x, c.y.checked_sub(1)?),
            Direction::West => Cell::new(c.x.checked_sub(1)?, c.y),
            Direction::East => Cell::new(c.x + 1, c.y),
        };
        self.on_grid(n).then_some(n)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| {
            Err(ModelError::Invalid {
                at: "kitchen".into(),
                msg,
            })
        };
        if self.width == 0 || self.height == 0 {
            return err("empty grid".into());
        }
        for (what, c) in [("start", self.start_cell), ("storage", self.storage_cell)] {
            if !self.on_grid(c) {
                return err(format!("{what} cell {c} is off the grid"));
            }
            if self.walls.contains(&c) {
                return err(format!("{what} cell {c} is inside a wall"));
            }
            if self.shadow_cells.contains(&c) {
                return err(format!("{what} cell {c} is a shadow cell"));
            }
        }
        let distinct: BTreeSet<_> = self.shadow_cells.iter().collect();
        if distinct.len() != self.shadow_cells.len() {
            return err("duplicate shadow cells".into());
        }
        for &c in &self.shadow_cells {
            if !self.free(c) {
                return err(format!("shadow cell {c} is off the grid or a wall"));
            }
        }
        if self.obstacles > self.shadow_cells.len() {
            return err(format!(
                "{} obstacles do not fit in {} shadow cells",
                self.obstacles,
                self.shadow_cells.len()
            ));
        }
        for (what, p) in [("p_fail", &self.p_fail), ("p_fp", &self.p_fp), ("p_fn", &self.p_fn)] {
            if *p < Prob::zero() || *p >= Prob::one() {
                return err(format!("{what} = {} outside [0, 1)", format_prob(p)));
            }
        }
        for (what, p) in [("delta_goal", &self.delta_goal), ("delta_safe", &self.delta_safe)] {
            if *p < Prob::zero() || *p > Prob::one() {
                return err(format!("{what} = {} outside [0, 1]", format_prob(p)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct KState {
    robot: Cell,
    placement: usize,
    holding: bool,
    collided: bool,
}

struct Layout<'c> {
    config: &'c KitchenConfig,
    placements: Vec<Vec<Cell>>,
}

impl Layout<'_> {
    fn occupied(&self, placement: usize, c: Cell) -> bool {
        self.placements[placement].contains(&c)
    }

    fn name(&self, s: &KState) -> String {
        let obstacles: Vec<String> = self.placements[s.placement].iter().map(Cell::to_string).collect();
        format!(
            "r{}.o{}.{}.{}",
            s.robot,
            if obstacles.is_empty() {
                "none".to_string()
            } else {
                obstacles.join("+")
            },
            if s.holding { "hold" } else { "empty" },
            if s.collided { "hit" } else { "ok" }
        )
    }

    /// Successor distribution of `s` under action `a` (see `action_names`).
    fn step(&self, s: &KState, a: usize) -> Vec<(KState, Prob)> {
        let cfg = self.config;
        if s.holding || s.collided {
            return vec![(s.clone(), Prob::one())];
        }
        match a {
            0..=3 => {
                let Some(target) = cfg.neighbor(s.robot, Direction::ALL[a]).filter(|c| cfg.free(*c)) else {
                    return vec![(s.clone(), Prob::one())];
                };
                let moved = KState {
                    robot: target,
                    collided: self.occupied(s.placement, target),
                    ..s.clone()
                };
                let mut out = vec![(moved, Prob::one() - &cfg.p_fail)];
                if !cfg.p_fail.is_zero() {
                    out.push((s.clone(), cfg.p_fail.clone()));
                }
                out
            }
            4..=7 => vec![(s.clone(), Prob::one())],
            _ if s.robot != cfg.storage_cell => vec![(s.clone(), Prob::one())],
            8 => vec![
                (
                    KState {
                        collided: true,
                        ..s.clone()
                    },
                    prob(1, 10),
                ),
                (
                    KState {
                        holding: true,
                        ..s.clone()
                    },
                    prob(9, 10),
                ),
            ],
            _ => vec![
                (s.clone(), prob(1, 20)),
                (
                    KState {
                        collided: true,
                        ..s.clone()
                    },
                    prob(1, 10),
                ),
                (
                    KState {
                        holding: true,
                        ..s.clone()
                    },
                    prob(17, 20),
                ),
            ],
        }
    }

    /// `Z(s', a, ·)` over `(o_pos, o_neg, o_null)`.
    fn observe(&self, s: &KState, a: usize) -> [Prob; 3] {
        let cfg = self.config;
        let z = Prob::zero;
        match a {
            0..=3 => [z(), z(), Prob::one()],
            4..=7 => {
                let seen = cfg
                    .neighbor(s.robot, Direction::ALL[a - 4])
                    .is_some_and(|c| self.occupied(s.placement, c));
                if seen {
                    [Prob::one() - &cfg.p_fn, cfg.p_fn.clone(), z()]
                } else {
                    [cfg.p_fp.clone(), Prob::one() - &cfg.p_fp, z()]
                }
            }
            8 if s.collided => [prob(3, 10), prob(7, 10), z()],
            _ => [prob(4, 5), prob(1, 5), z()],
        }
    }
}

pub fn action_names() -> Vec<String> {
    let mut names: Vec<String> = Direction::ALL.iter().map(|d| format!("move_{}", d.suffix())).collect();
    names.extend(Direction::ALL.iter().map(|d| format!("look_{}", d.suffix())));
    names.push("a_L".into());
    names.push("a_R".into());
    names
}

fn combinations(items: &[Cell], k: usize) -> Vec<Vec<Cell>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out: Vec<Vec<Cell>> = combinations(&items[1..], k - 1)
        .into_iter()
        .map(|mut rest| {
            rest.insert(0, items[0]);
            rest
        })
        .collect();
    out.extend(combinations(&items[1..], k));
    out
}

/// Builds the kitchen POMDP, keeping only states reachable from the initial
/// belief support.
pub fn build_kitchen(config: &KitchenConfig) -> Result<Problem, ModelError> {
    config.validate()?;
    let placements = combinations(&config.shadow_cells, config.obstacles);
    let layout = Layout { config, placements };
    let actions = action_names();

    let initial: Vec<KState> = (0..layout.placements.len())
        .map(|placement| KState {
            robot: config.start_cell,
            placement,
            holding: false,
            collided: false,
        })
        .collect();
    let mut seen: BTreeSet<KState> = initial.iter().cloned().collect();
    let mut queue: VecDeque<KState> = initial.iter().cloned().collect();
    while let Some(s) = queue.pop_front() {
        for a in 0..actions.len() {
            for (next, _) in layout.step(&s, a) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    let states: Vec<KState> = seen.into_iter().collect();
    let index = |s: &KState| states.binary_search(s).expect("reachable state");
    let names: Vec<String> = states.iter().map(|s| layout.name(s)).collect();

    let mut builder = Pomdp::builder(names, actions.clone(), ["o_pos", "o_neg", "o_null"]);
    for (si, s) in states.iter().enumerate() {
        for a in 0..actions.len() {
            for (next, p) in layout.step(s, a) {
                builder.add_transition_index(si, a, index(&next), p);
            }
            for (o, p) in layout.observe(s, a).into_iter().enumerate() {
                builder.add_observation_index(si, a, o, p);
            }
        }
        if config.restrict_pickup {
            let mut row = vec![true; actions.len()];
            let at_storage = s.robot == config.storage_cell;
            row[8] = at_storage;
            row[9] = at_storage;
            builder.set_availability_index(si, row);
        }
    }
    let model = builder.build()?;

    let holding: Vec<usize> = (0..states.len()).filter(|&i| states[i].holding).collect();
    let collided: Vec<usize> = (0..states.len()).filter(|&i| states[i].collided).collect();
    if holding.is_empty() {
        return Err(ModelError::Invalid {
            at: "kitchen".into(),
            msg: "storage cell is unreachable from the start cell".into(),
        });
    }
    let mut safe = Vec::new();
    if !collided.is_empty() {
        safe.push(below(collided, config.delta_safe.clone()));
    }
    let objective = SafeReachObjective::new(vec![above(holding, Prob::one() - &config.delta_goal)], safe);
    let support: Vec<usize> = initial.iter().map(index).collect();
    Ok(Problem {
        name: "kitchen".into(),
        initial: Belief::uniform_over(model.num_states(), &support),
        model,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::belief_update;

    fn tiny(shadow: usize, obstacles: usize) -> KitchenConfig {
        KitchenConfig {
            width: 4,
            height: 1,
            shadow_cells: (1..=shadow).map(|x| Cell::new(x, 0)).collect(),
            storage_cell: Cell::new(0, 0),
            start_cell: Cell::new(0, 0),
            obstacles,
            ..KitchenConfig::default()
        }
    }

    #[test]
    fn uniform_initial_placements() {
        let cfg = KitchenConfig {
            width: 4,
            height: 2,
            shadow_cells: vec![Cell::new(1, 0), Cell::new(2, 0), Cell::new(1, 1)],
            storage_cell: Cell::new(3, 0),
            ..KitchenConfig::default()
        };
        let p = build_kitchen(&cfg).unwrap();
        let support: Vec<usize> = p.initial.support().collect();
        assert_eq!(support.len(), 3);
        for s in support {
            assert_eq!(p.initial.get(s), &prob(1, 3));
        }
    }

    #[test]
    fn perfect_look_eliminates_placements() {
        let cfg = KitchenConfig {
            p_fn: prob(0, 1),
            p_fp: prob(0, 1),
            ..tiny(3, 1)
        };
        let p = build_kitchen(&cfg).unwrap();
        let look_east = p.model.action_index("look_east").unwrap();
        let after = belief_update(&p.initial, look_east, NEG, &p.model).unwrap();
        for s in after.support() {
            assert!(!p.model.state_name(s).contains("o1_0"), "{}", p.model.state_name(s));
        }
        assert_eq!(after.support().count(), 2);
    }

    #[test]
    fn pickup_away_from_storage_reveals_nothing() {
        let p = build_kitchen(&KitchenConfig::default()).unwrap();
        let a_l = p.model.action_index("a_L").unwrap();
        assert!(belief_update(&p.initial, a_l, NULL, &p.model).is_none());
        for o in [POS, NEG] {
            assert_eq!(belief_update(&p.initial, a_l, o, &p.model).unwrap(), p.initial);
        }
    }

    #[test]
    fn state_count_bounded() {
        let cfg = KitchenConfig::default();
        let p = build_kitchen(&cfg).unwrap();
        let placements = 2;
        assert!(p.model.num_states() <= cfg.num_cells() * placements * 2 * 2);
        assert!(p.objective.goal_within_safe());
    }

    #[test]
    fn rejects_bad_geometry() {
        let cfg = KitchenConfig {
            walls: vec![Cell::new(0, 0)],
            ..KitchenConfig::default()
        };
        assert!(build_kitchen(&cfg).is_err());
        let cfg = KitchenConfig {
            storage_cell: Cell::new(1, 0),
            ..KitchenConfig::default()
        };
        assert!(build_kitchen(&cfg).is_err());
        let cfg = KitchenConfig {
            obstacles: 3,
            ..KitchenConfig::default()
        };
        assert!(build_kitchen(&cfg).is_err());
        let cfg = KitchenConfig {
            p_fail: prob(1, 1),
            ..KitchenConfig::default()
        };
        assert!(build_kitchen(&cfg).is_err());
    }

    #[test]
    fn combinations_count() {
        let cells: Vec<Cell> = (0..5).map(|x| Cell::new(x, 0)).collect();
        assert_eq!(combinations(&cells, 2).len(), 10);
        assert_eq!(combinations(&cells, 0).len(), 1);
    }

    #[test]
    fn parses_cells() {
        assert_eq!("2,3".parse::<Cell>().unwrap(), Cell::new(2, 3));
        assert!("23".parse::<Cell>().is_err());
    }
}
