//! The three street layouts: crossroad (R1), line (R2) and mesh (R3).
//!
//! Node ids are stable: the gateway is 0, routers follow, then sensors.
//! Adjacent sensors on a street are 5 m apart.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::radio_phy::{Corner, LinkGeometry, Point, DEFAULT_WAVELENGTH_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Crossroad,
    Line,
    Mesh,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [TopologyKind::Crossroad, TopologyKind::Line, TopologyKind::Mesh];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Crossroad => "crossroad",
            TopologyKind::Line => "line",
            TopologyKind::Mesh => "mesh",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "crossroad" | "r1" => Ok(TopologyKind::Crossroad),
            "line" | "r2" => Ok(TopologyKind::Line),
            "mesh" | "r3" => Ok(TopologyKind::Mesh),
            _ => Err(ConfigError::UnknownTopology(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Gateway,
    Router,
    Sensor,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Gateway => "gateway",
            Role::Router => "router",
            Role::Sensor => "sensor",
        }
    }

    /// Full-function devices relay and receive; sensors only talk to them.
    pub fn is_ffd(self) -> bool {
        !matches!(self, Role::Sensor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: usize,
    pub role: Role,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub nodes: Vec<Node>,
    pub geometry: LinkGeometry,
}

pub const SENSOR_SPACING_M: f64 = 5.0;
pub const GATEWAY: usize = 0;

struct Builder {
    nodes: Vec<Node>,
    streets: Vec<Vec<usize>>,
}

impl Builder {
    fn add(&mut self, role: Role, position: Point, streets: &[usize]) {
        self.nodes.push(Node {
            id: self.nodes.len(),
            role,
            position,
        });
        self.streets.push(streets.to_vec());
    }
}

impl Topology {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn roles(&self) -> Vec<Role> {
        self.nodes.iter().map(|n| n.role).collect()
    }

    pub fn sensors(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.role == Role::Sensor).map(|n| n.id)
    }

    pub fn count(&self, role: Role) -> usize {
        self.nodes.iter().filter(|n| n.role == role).count()
    }
}

/// Deterministic layout of `kind`.
pub fn build_topology(kind: TopologyKind, corner_penalty_db: f64) -> Topology {
    let mut b = Builder {
        nodes: Vec::new(),
        streets: Vec::new(),
    };
    let s = SENSOR_SPACING_M;
    let corners;
    match kind {
        TopologyKind::Crossroad => {
            // Street 0 runs east-west, street 1 north-south, crossing at the
            // gateway.
            b.add(Role::Gateway, (0.0, 0.0), &[0, 1]);
            for i in 1..=6 {
                b.add(Role::Sensor, (s * i as f64, 0.0), &[0]);
            }
            for i in 1..=6 {
                b.add(Role::Sensor, (-s * i as f64, 0.0), &[0]);
            }
            for i in 1..=6 {
                b.add(Role::Sensor, (0.0, s * i as f64), &[1]);
            }
            for i in 1..=6 {
                b.add(Role::Sensor, (0.0, -s * i as f64), &[1]);
            }
            corners = vec![Corner {
                position: (0.0, 0.0),
                streets: vec![0, 1],
            }];
        }
        TopologyKind::Line => {
            b.add(Role::Gateway, (0.0, 0.0), &[0]);
            b.add(Role::Router, (62.5, 0.0), &[0]);
            for i in 1..=24 {
                b.add(Role::Sensor, (s * i as f64, 0.0), &[0]);
            }
            corners = Vec::new();
        }
        TopologyKind::Mesh => {
            // Streets: 0 y=0, 1 y=50, 2 x=0, 3 x=50, 4 x=100. FFDs sit on the
            // six intersections.
            let ffds: [(Role, Point, [usize; 2]); 6] = [
                (Role::Gateway, (0.0, 0.0), [0, 2]),
                (Role::Router, (50.0, 0.0), [0, 3]),
                (Role::Router, (100.0, 0.0), [0, 4]),
                (Role::Router, (0.0, 50.0), [1, 2]),
                (Role::Router, (50.0, 50.0), [1, 3]),
                (Role::Router, (100.0, 50.0), [1, 4]),
            ];
            for (role, p, st) in ffds {
                b.add(role, p, &st);
            }
            for (street, y) in [(0usize, 0.0), (1, 50.0)] {
                for x0 in [0.0, 50.0] {
                    for i in 1..=9 {
                        b.add(Role::Sensor, (x0 + s * i as f64, y), &[street]);
                    }
                }
            }
            for (street, x) in [(2usize, 0.0), (3, 50.0), (4, 100.0)] {
                for i in 1..=8 {
                    b.add(Role::Sensor, (x, s * i as f64), &[street]);
                }
            }
            corners = ffds
                .iter()
                .map(|(_, p, st)| Corner {
                    position: *p,
                    streets: st.to_vec(),
                })
                .collect();
        }
    }
    let geometry = LinkGeometry {
        positions: b.nodes.iter().map(|n| Some(n.position)).collect(),
        streets: b.streets,
        corners,
        wavelength_m: DEFAULT_WAVELENGTH_M,
        corner_penalty_db,
    };
    Topology {
        kind,
        nodes: b.nodes,
        geometry,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        let r1 = build_topology(TopologyKind::Crossroad, 20.0);
        assert_eq!((r1.n_nodes(), r1.count(Role::Gateway), r1.count(Role::Sensor)), (25, 1, 24));
        let r2 = build_topology(TopologyKind::Line, 20.0);
        assert_eq!((r2.n_nodes(), r2.count(Role::Router), r2.count(Role::Sensor)), (26, 1, 24));
        let r3 = build_topology(TopologyKind::Mesh, 20.0);
        assert_eq!((r3.n_nodes(), r3.count(Role::Router), r3.count(Role::Sensor)), (66, 5, 60));
    }

    #[test]
    fn rebuild_is_identical() {
        for k in TopologyKind::ALL {
            assert_eq!(build_topology(k, 20.0), build_topology(k, 20.0));
        }
    }

    #[test]
    fn crossroad_cross_arms_are_non_los() {
        let r1 = build_topology(TopologyKind::Crossroad, 20.0);
        let g = &r1.geometry;
        // Sensor 1 (east, 5 m) and sensor 13 (north, 5 m).
        let bent = g.path_loss_db(1, 13).unwrap();
        let los = g.path_loss_db(1, 7).unwrap(); // east 5 m to west 5 m: 10 m LOS
        assert!((bent - los - 20.0).abs() < 1e-9);
    }

    #[test]
    fn adjacent_sensors_are_five_metres_apart() {
        let r2 = build_topology(TopologyKind::Line, 20.0);
        let xs: Vec<f64> = r2.sensors().map(|n| r2.nodes[n].position.0).collect();
        assert!(xs.windows(2).all(|w| (w[1] - w[0] - 5.0).abs() < 1e-12));
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("R3".parse::<TopologyKind>().unwrap(), TopologyKind::Mesh);
        assert!(matches!("ring".parse::<TopologyKind>(), Err(ConfigError::UnknownTopology(_))));
    }
}
