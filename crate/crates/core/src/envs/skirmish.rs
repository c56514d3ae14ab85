//! Partially observable grid skirmish against a scripted enemy.
//!
//! Per step, in order: ally moves resolve in agent-index order (blocked or
//! off-grid moves become noops), ally attacks land, then each living enemy
//! attacks the nearest living ally in range or steps one cell toward it.
//! Reward follows the damage / kill / win scheme; the battle is won when
//! every enemy is eliminated.
//!
//! Actions: 0 = noop, 1..4 = move N/S/E/W, 5+j = attack enemy j.

use crate::envs::{Env, SkirmishSpec, StepResult, UnitSpec};
use crate::error::{Error, Result};

const MOVES: [(i32, i32); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)]; // N, S, E, W
const ATTACK_RANGE: i32 = 1;

#[derive(Debug, Clone)]
struct Unit {
    x: i32,
    y: i32,
    hp: u32,
    max_hp: u32,
    damage: u32,
}

impl Unit {
    fn alive(&self) -> bool {
        self.hp > 0
    }

    fn from_spec(s: &UnitSpec) -> Self {
        Unit {
            x: s.x,
            y: s.y,
            hp: s.hp,
            max_hp: s.hp,
            damage: s.damage,
        }
    }
}

fn chebyshev(ax: i32, ay: i32, bx: i32, by: i32) -> i32 {
    (ax - bx).abs().max((ay - by).abs())
}

#[derive(Debug, Clone)]
pub struct Skirmish {
    spec: SkirmishSpec,
    allies: Vec<Unit>,
    enemies: Vec<Unit>,
    t: usize,
    done: bool,
    reward_scale: f64,
}

impl Skirmish {
    pub fn new(spec: SkirmishSpec) -> Result<Self> {
        if spec.allies.is_empty() || spec.enemies.is_empty() {
            return Err(Error::Config("skirmish needs allies and enemies".into()));
        }
        if spec.width <= 0 || spec.height <= 0 || spec.horizon == 0 {
            return Err(Error::Config("skirmish grid and horizon must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for u in spec.allies.iter().chain(&spec.enemies) {
            if u.hp == 0 {
                return Err(Error::Config("units must spawn with positive hp".into()));
            }
            if u.x < 0 || u.x >= spec.width || u.y < 0 || u.y >= spec.height {
                return Err(Error::Config(format!(
                    "unit at ({}, {}) is off the {}x{} grid",
                    u.x, u.y, spec.width, spec.height
                )));
            }
            if !seen.insert((u.x, u.y)) {
                return Err(Error::Config(format!(
                    "two units spawn on the same cell ({}, {})",
                    u.x, u.y
                )));
            }
        }
        let max_return: f64 = spec.reward.w_damage
            * spec.enemies.iter().map(|e| e.hp as f64).sum::<f64>()
            + spec.reward.kill_bonus * spec.enemies.len() as f64
            + spec.reward.win_bonus;
        let reward_scale = if spec.reward.normalize {
            20.0 / max_return
        } else {
            1.0
        };
        let allies = spec.allies.iter().map(Unit::from_spec).collect();
        let enemies = spec.enemies.iter().map(Unit::from_spec).collect();
        Ok(Skirmish {
            spec,
            allies,
            enemies,
            t: 0,
            done: false,
            reward_scale,
        })
    }

    fn n_units(&self) -> usize {
        self.allies.len() + self.enemies.len()
    }

    fn occupied(&self, x: i32, y: i32) -> bool {
        self.allies
            .iter()
            .chain(&self.enemies)
            .any(|u| u.alive() && u.x == x && u.y == y)
    }

    fn on_grid(&self, x: i32, y: i32) -> bool {
        x >= 0 && x < self.spec.width && y >= 0 && y < self.spec.height
    }

    /// Nearest living ally to (x, y) by Chebyshev distance, ties by
    /// lower unit index.
    fn nearest_ally(&self, x: i32, y: i32) -> Option<usize> {
        let mut best: Option<(usize, i32)> = None;
        for (i, a) in self.allies.iter().enumerate() {
            if !a.alive() {
                continue;
            }
            let d = chebyshev(x, y, a.x, a.y);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    fn enemy_phase(&mut self) {
        for e_idx in 0..self.enemies.len() {
            if !self.enemies[e_idx].alive() {
                continue;
            }
            let (ex, ey, dmg) = {
                let e = &self.enemies[e_idx];
                (e.x, e.y, e.damage)
            };
            let target = match self.nearest_ally(ex, ey) {
                Some(i) => i,
                None => break,
            };
            let (tx, ty) = (self.allies[target].x, self.allies[target].y);
            if chebyshev(ex, ey, tx, ty) <= ATTACK_RANGE {
                let a = &mut self.allies[target];
                a.hp = a.hp.saturating_sub(dmg);
            } else {
                let dx = tx - ex;
                let dy = ty - ey;
                let (sx, sy) = if dx.abs() >= dy.abs() && dx != 0 {
                    (dx.signum(), 0)
                } else if dy != 0 {
                    (0, dy.signum())
                } else {
                    (0, 0)
                };
                let (nx, ny) = (ex + sx, ey + sy);
                if (sx, sy) != (0, 0) && self.on_grid(nx, ny) && !self.occupied(nx, ny) {
                    let e = &mut self.enemies[e_idx];
                    e.x = nx;
                    e.y = ny;
                }
            }
        }
    }
}

impl Env for Skirmish {
    fn n_agents(&self) -> usize {
        self.allies.len()
    }

    fn n_actions(&self) -> usize {
        5 + self.enemies.len()
    }

    fn obs_dim(&self) -> usize {
        3 + 4 * (self.n_units() - 1)
    }

    fn state_dim(&self) -> usize {
        3 * self.n_units()
    }

    fn max_steps(&self) -> usize {
        self.spec.horizon
    }

    fn reset(&mut self, _seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.allies = self.spec.allies.iter().map(Unit::from_spec).collect();
        self.enemies = self.spec.enemies.iter().map(Unit::from_spec).collect();
        self.t = 0;
        self.done = false;
        let obs = (0..self.allies.len()).map(|i| self.observe(i)).collect();
        (obs, self.state())
    }

    /// Each unit contributes (x, y, hp / hp_max), allies first, then
    /// enemies, in spawn order.
    fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        for u in self.allies.iter().chain(&self.enemies) {
            s.push(u.x as f64);
            s.push(u.y as f64);
            s.push(u.hp as f64 / u.max_hp as f64);
        }
        s
    }

    /// Own (x, y, hp fraction), then one slot per other unit (allies in
    /// index order excluding self, then enemies): (visible, dx, dy,
    /// hp fraction), zeroed when out of sight or dead. A dead observer
    /// sees nothing.
    fn observe(&self, agent: usize) -> Vec<f64> {
        let mut o = vec![0.0; self.obs_dim()];
        let me = &self.allies[agent];
        if !me.alive() {
            return o;
        }
        o[0] = me.x as f64;
        o[1] = me.y as f64;
        o[2] = me.hp as f64 / me.max_hp as f64;
        let mut slot = 3;
        let others = self
            .allies
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != agent)
            .map(|(_, u)| u)
            .chain(self.enemies.iter());
        for u in others {
            if u.alive() && chebyshev(me.x, me.y, u.x, u.y) <= self.spec.sight_range {
                o[slot] = 1.0;
                o[slot + 1] = (u.x - me.x) as f64;
                o[slot + 2] = (u.y - me.y) as f64;
                o[slot + 3] = u.hp as f64 / u.max_hp as f64;
            }
            slot += 4;
        }
        o
    }

    fn avail_actions(&self, agent: usize) -> Vec<bool> {
        let mut mask = vec![false; self.n_actions()];
        mask[0] = true; // noop is always available
        let me = &self.allies[agent];
        if !me.alive() {
            return mask;
        }
        for (a, (dx, dy)) in MOVES.iter().enumerate() {
            if self.on_grid(me.x + dx, me.y + dy) {
                mask[1 + a] = true;
            }
        }
        for (j, e) in self.enemies.iter().enumerate() {
            if e.alive() && chebyshev(me.x, me.y, e.x, e.y) <= ATTACK_RANGE {
                mask[5 + j] = true;
            }
        }
        mask
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult> {
        if self.done {
            return Err(Error::InvalidArgument(
                "skirmish episode already terminated".into(),
            ));
        }
        if joint_action.len() != self.allies.len() {
            return Err(Error::InvalidArgument(format!(
                "joint action has {} entries for {} agents",
                joint_action.len(),
                self.allies.len()
            )));
        }
        for (i, &a) in joint_action.iter().enumerate() {
            let avail = self.avail_actions(i);
            if a >= avail.len() || !avail[a] {
                return Err(Error::InvalidArgument(format!(
                    "agent {i} chose unavailable action {a}"
                )));
            }
        }

        // (1) ally moves, agent-index order; blocked moves become noops
        for (i, &a) in joint_action.iter().enumerate() {
            if (1..5).contains(&a) && self.allies[i].alive() {
                let (dx, dy) = MOVES[a - 1];
                let (nx, ny) = (self.allies[i].x + dx, self.allies[i].y + dy);
                if self.on_grid(nx, ny) && !self.occupied(nx, ny) {
                    self.allies[i].x = nx;
                    self.allies[i].y = ny;
                }
            }
        }

        // (2) ally attacks; hp floors at zero, overkill removes nothing
        let mut damage_dealt = 0u32;
        let mut kills = 0u32;
        for (i, &a) in joint_action.iter().enumerate() {
            if a >= 5 && self.allies[i].alive() {
                let j = a - 5;
                let dmg = self.allies[i].damage.min(self.enemies[j].hp);
                if dmg > 0 {
                    self.enemies[j].hp -= dmg;
                    damage_dealt += dmg;
                    if self.enemies[j].hp == 0 {
                        kills += 1;
                    }
                }
            }
        }

        let all_enemies_dead = self.enemies.iter().all(|e| !e.alive());

        // (3) scripted enemies
        if !all_enemies_dead {
            self.enemy_phase();
        }

        // (4) reward and termination
        self.t += 1;
        let won = all_enemies_dead;
        let allies_dead = self.allies.iter().all(|a| !a.alive());
        let terminated = won || allies_dead || self.t >= self.spec.horizon;
        self.done = terminated;
        let mut reward = self.spec.reward.w_damage * damage_dealt as f64
            + self.spec.reward.kill_bonus * kills as f64;
        if won {
            reward += self.spec.reward.win_bonus;
        }
        reward *= self.reward_scale;

        Ok(StepResult {
            observations: (0..self.allies.len()).map(|i| self.observe(i)).collect(),
            state: self.state(),
            reward,
            terminated,
            won,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::RewardSpec;

    fn spec_2v1() -> SkirmishSpec {
        SkirmishSpec {
            width: 5,
            height: 5,
            allies: vec![
                UnitSpec { x: 1, y: 1, hp: 4, damage: 2 },
                UnitSpec { x: 1, y: 3, hp: 4, damage: 2 },
            ],
            enemies: vec![UnitSpec { x: 4, y: 2, hp: 6, damage: 1 }],
            horizon: 25,
            sight_range: 4,
            reward: RewardSpec::default(),
        }
    }

    #[test]
    fn reset_state_lists_units_in_fixed_order() {
        let mut env = Skirmish::new(spec_2v1()).unwrap();
        let (_, state) = env.reset(7);
        assert_eq!(
            state,
            vec![1.0, 1.0, 1.0, 1.0, 3.0, 1.0, 4.0, 2.0, 1.0]
        );
    }

    #[test]
    fn killing_the_last_enemy_pays_damage_kill_and_win() {
        let spec = SkirmishSpec {
            width: 4,
            height: 3,
            allies: vec![UnitSpec { x: 1, y: 1, hp: 4, damage: 3 }],
            enemies: vec![UnitSpec { x: 2, y: 1, hp: 3, damage: 1 }],
            horizon: 10,
            sight_range: 3,
            reward: RewardSpec::default(),
        };
        let mut env = Skirmish::new(spec).unwrap();
        env.reset(0);
        let avail = env.avail_actions(0);
        assert!(avail[5], "enemy is adjacent, attack must be available");
        let r = env.step(&[5]).unwrap();
        assert_eq!(r.reward, 3.0 + 10.0 + 200.0);
        assert!(r.won);
        assert!(r.terminated);
    }

    #[test]
    fn noop_step_moves_enemy_closer() {
        let mut env = Skirmish::new(spec_2v1()).unwrap();
        env.reset(0);
        let r = env.step(&[0, 0]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(!r.terminated);
        // enemy at (4,2), nearest ally (1,1): |dx|=3 >= |dy|=1, steps west
        assert_eq!(r.state[6..8], [3.0, 2.0]);
        // allies did not move
        assert_eq!(r.state[0..2], [1.0, 1.0]);
    }

    #[test]
    fn corner_moves_are_masked() {
        let spec = SkirmishSpec {
            width: 3,
            height: 3,
            allies: vec![UnitSpec { x: 0, y: 0, hp: 2, damage: 1 }],
            enemies: vec![UnitSpec { x: 2, y: 2, hp: 2, damage: 1 }],
            horizon: 5,
            sight_range: 3,
            reward: RewardSpec::default(),
        };
        let mut env = Skirmish::new(spec).unwrap();
        env.reset(0);
        let avail = env.avail_actions(0);
        // at (0,0): N (y-1) and W (x-1) are off-grid
        assert_eq!(avail[1], false, "north off-grid");
        assert_eq!(avail[4], false, "west off-grid");
        assert!(avail[2] && avail[3], "south and east on-grid");
        assert!(!avail[5], "enemy out of attack range");
    }

    #[test]
    fn dead_agent_only_noops_and_observes_nothing() {
        let spec = SkirmishSpec {
            width: 4,
            height: 3,
            allies: vec![UnitSpec { x: 1, y: 1, hp: 1, damage: 1 }],
            enemies: vec![UnitSpec { x: 2, y: 1, hp: 9, damage: 5 }],
            horizon: 10,
            sight_range: 3,
            reward: RewardSpec::default(),
        };
        let mut env = Skirmish::new(spec).unwrap();
        env.reset(0);
        let r = env.step(&[0]).unwrap(); // enemy kills the lone ally
        assert!(r.terminated);
        assert!(!r.won);
        assert_eq!(env.avail_actions(0), vec![true, false, false, false, false, false]);
        assert!(env.observe(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn observation_slots_follow_layout_and_sight() {
        let spec = SkirmishSpec {
            width: 8,
            height: 8,
            allies: vec![UnitSpec { x: 2, y: 2, hp: 4, damage: 1 }],
            enemies: vec![
                UnitSpec { x: 3, y: 2, hp: 4, damage: 1 },
                UnitSpec { x: 6, y: 6, hp: 4, damage: 1 },
            ],
            horizon: 10,
            sight_range: 2,
            reward: RewardSpec::default(),
        };
        let mut env = Skirmish::new(spec.clone()).unwrap();
        env.reset(0);
        // halve the first enemy's hp so the fraction is visible
        env.enemies[0].hp = 2;
        let o = env.observe(0);
        assert_eq!(o.len(), 3 + 4 * 2);
        assert_eq!(&o[0..3], &[2.0, 2.0, 1.0]);
        // enemy 0 at (+1, 0), hp 2/4, within sight 2
        assert_eq!(&o[3..7], &[1.0, 1.0, 0.0, 0.5]);
        // enemy 1 at Chebyshev distance 4 > 2: zeroed
        assert_eq!(&o[7..11], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(env.observe(0).len(), env.obs_dim());
    }

    #[test]
    fn blocked_move_becomes_noop() {
        let spec = SkirmishSpec {
            width: 4,
            height: 1,
            allies: vec![
                UnitSpec { x: 0, y: 0, hp: 2, damage: 1 },
                UnitSpec { x: 1, y: 0, hp: 2, damage: 1 },
            ],
            enemies: vec![UnitSpec { x: 3, y: 0, hp: 9, damage: 0 }],
            horizon: 5,
            sight_range: 4,
            reward: RewardSpec::default(),
        };
        let mut env = Skirmish::new(spec).unwrap();
        env.reset(0);
        // agent 0 tries to move east into agent 1's cell: blocked.
        // agent 1 moves east into the free cell (2,0): allowed.
        let r = env.step(&[3, 3]).unwrap();
        assert_eq!(r.state[0..2], [0.0, 0.0]);
        assert_eq!(r.state[3..5], [2.0, 0.0]);
    }

    #[test]
    fn unavailable_action_rejected() {
        let mut env = Skirmish::new(spec_2v1()).unwrap();
        env.reset(0);
        // enemy is out of attack range at reset
        assert!(env.step(&[5, 0]).is_err());
    }

    #[test]
    fn hp_audit_over_random_episodes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for episode in 0..30 {
            let mut env = Skirmish::new(spec_2v1()).unwrap();
            env.reset(episode);
            let initial_hp: u32 = env.enemies.iter().map(|e| e.hp).sum();
            let mut last_total = initial_hp;
            let mut damage_reward_sum = 0.0;
            let mut kill_count = 0u32;
            let mut win_bonus_total = 0.0;
            loop {
                let joint: Vec<usize> = (0..env.n_agents())
                    .map(|i| {
                        let avail = env.avail_actions(i);
                        let options: Vec<usize> = avail
                            .iter()
                            .enumerate()
                            .filter_map(|(a, &ok)| ok.then_some(a))
                            .collect();
                        options[rng.gen_range(0..options.len())]
                    })
                    .collect();
                let before_kills = env.enemies.iter().filter(|e| !e.alive()).count() as u32;
                let r = env.step(&joint).unwrap();
                let after_kills = env.enemies.iter().filter(|e| !e.alive()).count() as u32;
                let total: u32 = env.enemies.iter().map(|e| e.hp).sum();
                assert!(total <= last_total, "enemy hp increased");
                let removed = (last_total - total) as f64;
                let step_kills = after_kills - before_kills;
                kill_count += step_kills;
                let won_bonus = if r.won { 200.0 } else { 0.0 };
                win_bonus_total += won_bonus;
                // reward decomposes exactly into the three components
                assert!(
                    (r.reward - (removed + 10.0 * step_kills as f64 + won_bonus)).abs() < 1e-12
                );
                damage_reward_sum += removed;
                last_total = total;
                if r.terminated {
                    break;
                }
            }
            let final_hp: u32 = env.enemies.iter().map(|e| e.hp).sum();
            assert_eq!(damage_reward_sum, (initial_hp - final_hp) as f64);
            let dead = env.enemies.iter().filter(|e| !e.alive()).count() as u32;
            assert_eq!(kill_count, dead);
            assert!(win_bonus_total == 0.0 || dead == env.enemies.len() as u32);
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let mut env1 = Skirmish::new(spec_2v1()).unwrap();
        let mut env2 = Skirmish::new(spec_2v1()).unwrap();
        env1.reset(5);
        env2.reset(5);
        let script = [[3usize, 3], [3, 3], [0, 2], [3, 0], [0, 0]];
        for joint in script {
            let r1 = env1.step(&joint).unwrap();
            let r2 = env2.step(&joint).unwrap();
            assert_eq!(r1.state, r2.state);
            assert_eq!(r1.reward, r2.reward);
            assert_eq!(r1.observations, r2.observations);
            if r1.terminated {
                break;
            }
        }
    }

    #[test]
    fn normalized_rewards_cap_the_return_at_twenty() {
        let mut spec = spec_2v1();
        spec.reward.normalize = true;
        let max_return = 1.0 * 6.0 + 10.0 + 200.0;
        let mut env = Skirmish::new(spec).unwrap();
        env.reset(0);
        // drive both allies adjacent and batter the enemy
        let mut total = 0.0;
        loop {
            let joint: Vec<usize> = (0..env.n_agents())
                .map(|i| {
                    let avail = env.avail_actions(i);
                    if avail[5] {
                        5
                    } else if avail[3] {
                        3
                    } else {
                        0
                    }
                })
                .collect();
            let r = env.step(&joint).unwrap();
            total += r.reward;
            if r.terminated {
                break;
            }
        }
        assert!(total <= 20.0 + 1e-9);
        let _ = max_return;
    }
}
