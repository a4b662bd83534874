use std::collections::BTreeMap;

use super::EmitError;
use crate::hw_ir::{Control, HwComponent, PortRef};

/// Upper bound on the states a statically scheduled `Par` may expand to.
pub const PAR_STATE_LIMIT: usize = 4096;

pub const IDLE: usize = 0;
pub const DONE: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    /// The `go` input.
    Go,
    /// A 1-bit port sampled in the current state.
    Port(PortRef),
    /// Repeat counter `k` is on its final iteration.
    Last(usize),
}

/// Where the FSM goes at the end of a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    State(usize),
    Branch { cond: Cond, then: Box<Target>, els: Box<Target> },
    /// Loads repeat counter `counter` with `value`, then continues.
    Load { counter: usize, value: u64, then: Box<Target> },
    /// Decrements repeat counter `counter`, then continues.
    Decrement { counter: usize, then: Box<Target> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmState {
    /// Groups active while the FSM sits in this state.
    pub groups: Vec<String>,
    pub next: Target,
}

/// Binary-encoded controller for a control tree. State 0 is idle (waits for
/// `go`), state 1 is done (pulses `done`, returns to idle). Every other state
/// lasts one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fsm {
    pub states: Vec<FsmState>,
    /// Trip count of each repeat counter.
    pub counters: Vec<u64>,
}

impl Fsm {
    pub fn width(&self) -> u32 {
        bits_for(self.states.len() as u64 - 1)
    }

    /// Width of repeat counter `k`.
    pub fn counter_width(&self, k: usize) -> u32 {
        bits_for(self.counters[k])
    }

    /// Every state in which group `g` is active.
    pub fn states_of(&self, g: &str) -> Vec<usize> {
        (0..self.states.len()).filter(|&s| self.states[s].groups.iter().any(|x| x == g)).collect()
    }
}

/// Bits needed to hold `v`, at least 1.
pub fn bits_for(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}

pub fn build_fsm(c: &HwComponent) -> Result<Fsm, EmitError> {
    let mut b = Builder { c, states: Vec::new(), pending: Vec::new(), counters: Vec::new() };
    b.states.push(FsmState { groups: Vec::new(), next: Target::State(IDLE) });
    b.states.push(FsmState { groups: Vec::new(), next: Target::State(IDLE) });
    let entry = b.compile(&c.control, Target::State(DONE))?;
    b.states[IDLE].next = Target::Branch { cond: Cond::Go, then: Box::new(entry), els: Box::new(Target::State(IDLE)) };
    let mut states = std::mem::take(&mut b.states);
    for s in &mut states {
        s.next = b.resolve(&s.next);
    }
    Ok(Fsm { states, counters: b.counters })
}

struct Builder<'a> {
    c: &'a HwComponent,
    states: Vec<FsmState>,
    /// Forward references, encoded as `State(PENDING_BASE + i)` until resolved.
    pending: Vec<Option<Target>>,
    counters: Vec<u64>,
}

const PENDING_BASE: usize = usize::MAX / 2;

impl<'a> Builder<'a> {
    fn hole(&mut self) -> Target {
        self.pending.push(None);
        Target::State(PENDING_BASE + self.pending.len() - 1)
    }

    fn fill(&mut self, hole: &Target, t: Target) {
        if let Target::State(s) = hole {
            self.pending[s - PENDING_BASE] = Some(t);
        }
    }

    fn resolve(&self, t: &Target) -> Target {
        match t {
            Target::State(s) if *s >= PENDING_BASE => match &self.pending[s - PENDING_BASE] {
                Some(inner) => self.resolve(inner),
                None => unreachable!("unfilled forward reference"),
            },
            Target::State(_) => t.clone(),
            Target::Branch { cond, then, els } => {
                Target::Branch { cond: cond.clone(), then: Box::new(self.resolve(then)), els: Box::new(self.resolve(els)) }
            }
            Target::Load { counter, value, then } => Target::Load { counter: *counter, value: *value, then: Box::new(self.resolve(then)) },
            Target::Decrement { counter, then } => Target::Decrement { counter: *counter, then: Box::new(self.resolve(then)) },
        }
    }

    fn state(&mut self, groups: Vec<String>) -> usize {
        self.states.push(FsmState { groups, next: Target::State(IDLE) });
        self.states.len() - 1
    }

    fn zero_cycle(&self, n: &Control) -> bool {
        match n {
            Control::Enable(g) => self.c.group(g).map_or(0, |g| g.latency) == 0,
            Control::Seq(cs) | Control::Par(cs) => cs.iter().all(|c| self.zero_cycle(c)),
            Control::While { .. } => false,
            Control::Repeat { count, body } => *count == 0 || self.zero_cycle(body),
        }
    }

    /// Emits states for `n` and returns its entry; `next` follows it.
    fn compile(&mut self, n: &Control, next: Target) -> Result<Target, EmitError> {
        if self.zero_cycle(n) {
            return Ok(next);
        }
        match n {
            Control::Enable(g) => {
                let latency = self.c.group(g).map_or(0, |g| g.latency);
                let first = self.states.len();
                for _ in 0..latency {
                    self.state(vec![g.clone()]);
                }
                for s in first..self.states.len() - 1 {
                    self.states[s].next = Target::State(s + 1);
                }
                let last = self.states.len() - 1;
                self.states[last].next = next;
                Ok(Target::State(first))
            }
            Control::Seq(cs) => {
                let mut entry = None;
                let mut prev_hole: Option<Target> = None;
                for child in cs {
                    let hole = self.hole();
                    let e = self.compile(child, hole.clone())?;
                    match &prev_hole {
                        Some(h) => self.fill(h, e),
                        None => entry = Some(e),
                    }
                    prev_hole = Some(hole);
                }
                if let Some(h) = prev_hole {
                    self.fill(&h, next);
                }
                Ok(entry.expect("non-empty seq"))
            }
            Control::Par(_) => {
                let mut cycles = Vec::new();
                self.schedule(n, &mut cycles, 0)?;
                let first = self.states.len();
                for groups in cycles {
                    self.state(groups);
                }
                for s in first..self.states.len() - 1 {
                    self.states[s].next = Target::State(s + 1);
                }
                let last = self.states.len() - 1;
                self.states[last].next = next;
                Ok(Target::State(first))
            }
            Control::While { port, cond, body } => {
                let s = self.state(vec![cond.clone()]);
                let body_entry = self.compile(body, Target::State(s))?;
                self.states[s].next = Target::Branch { cond: Cond::Port(port.clone()), then: Box::new(body_entry), els: Box::new(next) };
                Ok(Target::State(s))
            }
            Control::Repeat { count, body } => {
                let k = self.counters.len();
                self.counters.push(*count);
                let end = self.hole();
                let body_entry = self.compile(body, end.clone())?;
                let again = Target::Decrement { counter: k, then: Box::new(body_entry.clone()) };
                self.fill(&end, Target::Branch { cond: Cond::Last(k), then: Box::new(next), els: Box::new(again) });
                Ok(Target::Load { counter: k, value: *count, then: Box::new(body_entry) })
            }
        }
    }

    /// Cycle-by-cycle active groups of a While-free tree, merged into
    /// `cycles` starting at cycle `at`. Returns the tree's length.
    fn schedule(&self, n: &Control, cycles: &mut Vec<Vec<String>>, at: usize) -> Result<usize, EmitError> {
        let len = match n {
            Control::Enable(g) => {
                let latency = self.c.group(g).map_or(0, |g| g.latency) as usize;
                for t in at..at + latency {
                    self.slot(cycles, t)?.push(g.clone());
                }
                latency
            }
            Control::Seq(cs) => {
                let mut t = at;
                for child in cs {
                    t += self.schedule(child, cycles, t)?;
                }
                t - at
            }
            Control::Par(cs) => {
                let mut longest = 0;
                for child in cs {
                    longest = longest.max(self.schedule(child, cycles, at)?);
                }
                longest
            }
            Control::Repeat { count, body } => {
                let mut t = at;
                for _ in 0..*count {
                    let step = self.schedule(body, cycles, t)?;
                    if step == 0 {
                        break;
                    }
                    t += step;
                }
                t - at
            }
            Control::While { .. } => return Err(EmitError::UnsupportedControl("`while` inside `par`".into())),
        };
        Ok(len)
    }

    fn slot<'v>(&self, cycles: &'v mut Vec<Vec<String>>, t: usize) -> Result<&'v mut Vec<String>, EmitError> {
        if t >= PAR_STATE_LIMIT {
            return Err(EmitError::UnsupportedControl(format!("`par` needs more than {PAR_STATE_LIMIT} states")));
        }
        if cycles.len() <= t {
            cycles.resize(t + 1, Vec::new());
        }
        Ok(&mut cycles[t])
    }
}

/// Condition values a state needs to pick its successor, in rendering order.
pub fn conditions(t: &Target, out: &mut Vec<PortRef>) {
    match t {
        Target::Branch { cond, then, els } => {
            if let Cond::Port(p) = cond {
                out.push(p.clone());
            }
            conditions(then, out);
            conditions(els, out);
        }
        Target::Load { then, .. } | Target::Decrement { then, .. } => conditions(then, out),
        Target::State(_) => {}
    }
}

/// Follows `t` with the given port samples and counter values, applying
/// counter updates. Returns the next state.
pub fn take(t: &Target, sample: &dyn Fn(&PortRef) -> bool, counters: &mut BTreeMap<usize, u64>) -> usize {
    match t {
        Target::State(s) => *s,
        Target::Branch { cond, then, els } => {
            let hit = match cond {
                Cond::Port(p) => sample(p),
                Cond::Go => sample(&PortRef::new("", "go")),
                Cond::Last(k) => counters.get(k).copied().unwrap_or(0) == 1,
            };
            take(if hit { then } else { els }, sample, counters)
        }
        Target::Load { counter, value, then } => {
            let s = take(then, sample, counters);
            counters.insert(*counter, *value);
            s
        }
        Target::Decrement { counter, then } => {
            let s = take(then, sample, counters);
            let v = counters.entry(*counter).or_default();
            *v = v.wrapping_sub(1);
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw_ir::Group;

    fn comp(control: Control) -> HwComponent {
        let mut c = HwComponent::new("t");
        for g in ["a", "b", "c"] {
            c.groups.push(Group::new(g));
        }
        c.groups[2].latency = 2;
        c.control = control;
        c
    }

    fn en(g: &str) -> Control {
        Control::Enable(g.into())
    }

    #[test]
    fn empty_control_is_idle_and_done() {
        let f = build_fsm(&comp(Control::empty())).unwrap();
        assert_eq!(f.states.len(), 2);
        assert_eq!(f.width(), 1);
        assert!(matches!(&f.states[IDLE].next, Target::Branch { then, .. } if **then == Target::State(DONE)));
    }

    #[test]
    fn seq_numbers_forward() {
        let f = build_fsm(&comp(Control::Seq(vec![en("a"), Control::empty(), en("c"), en("b")]))).unwrap();
        let groups: Vec<_> = f.states.iter().skip(2).map(|s| s.groups.join(",")).collect();
        assert_eq!(groups, ["a", "c", "c", "b"]);
        assert_eq!(f.states[2].next, Target::State(3));
        assert_eq!(f.states[5].next, Target::State(DONE));
        assert_eq!(f.width(), 3);
    }

    #[test]
    fn par_is_scheduled_statically() {
        let f = build_fsm(&comp(Control::Par(vec![en("a"), Control::Seq(vec![en("b"), en("c")])]))).unwrap();
        let groups: Vec<_> = f.states.iter().skip(2).map(|s| s.groups.join(",")).collect();
        assert_eq!(groups, ["a,b", "c", "c"]);
    }

    #[test]
    fn while_in_par_is_rejected() {
        let w = Control::While { port: PortRef::new("x", "out"), cond: "a".into(), body: Box::new(en("b")) };
        assert!(matches!(build_fsm(&comp(Control::Par(vec![w]))), Err(EmitError::UnsupportedControl(_))));
    }

    #[test]
    fn repeat_counts() {
        let f = build_fsm(&comp(Control::Repeat { count: 3, body: Box::new(en("a")) })).unwrap();
        let mut counters = BTreeMap::new();
        let mut s = IDLE;
        let mut trail = Vec::new();
        for _ in 0..8 {
            s = take(&f.states[s].next, &|_| true, &mut counters);
            trail.push(s);
        }
        assert_eq!(trail, [2, 2, 2, DONE, IDLE, 2, 2, 2]);
        assert_eq!(f.counter_width(0), 2);
    }
}
