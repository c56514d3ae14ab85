//! Bundled environment fixtures.

use crate::envs::{EnvSpec, MatrixGameSpec, RewardSpec, SkirmishSpec, UnitSpec};
use crate::error::{Error, Result};

pub const FIXTURE_NAMES: [&str; 4] = ["additive2x3", "nonmono3x3", "skirmish-2v1", "skirmish-3v3"];

/// Looks up a bundled environment by name.
///
/// - `additive2x3`: two agents, three actions, payoff r1(a1) + r2(a2)
///   with r1 = [0, 3, 1] and r2 = [2, 0, 4]; optimum (1, 2) = 7.
/// - `nonmono3x3`: the classic non-monotonic coordination payoff with a
///   single high-payoff corner at (0, 0) = 8 guarded by -12 penalties.
/// - `skirmish-2v1`: two allies (hp 4, damage 2) against one tougher
///   enemy (hp 6, damage 1) on a 5x5 grid.
/// - `skirmish-3v3`: symmetric three-a-side battle on a 7x5 grid.
pub fn fixture(name: &str) -> Result<EnvSpec> {
    match name {
        "additive2x3" => {
            let r1 = [0.0, 3.0, 1.0];
            let r2 = [2.0, 0.0, 4.0];
            let mut payoff = Vec::with_capacity(9);
            for a1 in 0..3 {
                for a2 in 0..3 {
                    payoff.push(r1[a1] + r2[a2]);
                }
            }
            Ok(EnvSpec::Matrix(MatrixGameSpec {
                n_agents: 2,
                n_actions: 3,
                payoff,
            }))
        }
        "nonmono3x3" => Ok(EnvSpec::Matrix(MatrixGameSpec {
            n_agents: 2,
            n_actions: 3,
            payoff: vec![8.0, -12.0, -12.0, -12.0, 0.0, 0.0, -12.0, 0.0, 0.0],
        })),
        "skirmish-2v1" => Ok(EnvSpec::Skirmish(SkirmishSpec {
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
        })),
        "skirmish-3v3" => Ok(EnvSpec::Skirmish(SkirmishSpec {
            width: 7,
            height: 5,
            allies: vec![
                UnitSpec { x: 1, y: 1, hp: 4, damage: 2 },
                UnitSpec { x: 1, y: 2, hp: 4, damage: 2 },
                UnitSpec { x: 1, y: 3, hp: 4, damage: 2 },
            ],
            enemies: vec![
                UnitSpec { x: 5, y: 1, hp: 4, damage: 2 },
                UnitSpec { x: 5, y: 2, hp: 4, damage: 2 },
                UnitSpec { x: 5, y: 3, hp: 4, damage: 2 },
            ],
            horizon: 30,
            sight_range: 5,
            reward: RewardSpec::default(),
        })),
        other => Err(Error::Config(format!(
            "unknown fixture '{other}'; available: {}",
            FIXTURE_NAMES.join(", ")
        ))),
    }
}
