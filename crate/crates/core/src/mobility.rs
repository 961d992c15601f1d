//! Vehicles and their movement along routes.
//!
//! A vehicle is a point on a directed edge. It drives at whatever speed the
//! caller assigns to the edge, carries leftover time across vertices, and
//! arrives when it reaches the head of an edge that ends at its destination
//! with nothing left in its route.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::graph::{EdgeId, GraphError, RoadGraph, VertexId};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "veh{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleState {
    Pending,
    Active,
    Arrived,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("{vehicle} reached {vertex} with an empty route but is headed for {dest}")]
    RouteExhausted {
        vehicle: VehicleId,
        vertex: VertexId,
        dest: VertexId,
    },
    #[error("{vehicle}: route edge {edge} does not start at {vertex}")]
    DisconnectedRoute {
        vehicle: VehicleId,
        edge: EdgeId,
        vertex: VertexId,
    },
    #[error("{vehicle} is {state:?}, expected {expected:?}")]
    WrongState {
        vehicle: VehicleId,
        state: VehicleState,
        expected: VehicleState,
    },
    #[error("{vehicle}: speed {speed} on {edge} is not positive")]
    BadSpeed {
        vehicle: VehicleId,
        edge: EdgeId,
        speed: f64,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub current_edge: EdgeId,
    /// Meters from the start of `current_edge`.
    pub offset: f64,
    pub dest: VertexId,
    /// Edges still to drive after `current_edge`.
    pub route: VecDeque<EdgeId>,
    /// Scheduled departure time from the scenario.
    pub depart_time: f64,
    pub state: VehicleState,
    /// Simulation time at which the vehicle actually entered the road.
    pub activated_at: Option<f64>,
    pub arrive_time: Option<f64>,
    pub route_changes: u32,
}

impl Vehicle {
    pub fn new(
        id: VehicleId,
        origin_edge: EdgeId,
        offset: f64,
        dest: VertexId,
        depart_time: f64,
    ) -> Self {
        Self {
            id,
            current_edge: origin_edge,
            offset,
            dest,
            route: VecDeque::new(),
            depart_time,
            state: VehicleState::Pending,
            activated_at: None,
            arrive_time: None,
            route_changes: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == VehicleState::Active
    }

    /// Pending -> Active.
    pub fn activate(&mut self, now: f64) -> Result<(), MobilityError> {
        self.expect_state(VehicleState::Pending)?;
        self.state = VehicleState::Active;
        self.activated_at = Some(now);
        Ok(())
    }

    pub fn trip_time(&self) -> Option<f64> {
        Some(self.arrive_time? - self.activated_at?)
    }

    /// Interpolated position on the current edge.
    pub fn position(&self, g: &RoadGraph) -> Result<Point, GraphError> {
        let e = g.edge(self.current_edge)?;
        let from = g.vertex(e.from)?.pos;
        let to = g.vertex(e.to)?.pos;
        Ok(from.lerp(&to, self.offset / e.length))
    }

    /// Head vertex of the current edge: where a new route takes effect.
    pub fn next_vertex(&self, g: &RoadGraph) -> Result<VertexId, GraphError> {
        Ok(g.edge(self.current_edge)?.to)
    }

    /// Replace the remaining route. Returns whether it differed from the old one.
    pub fn set_route(&mut self, route: impl IntoIterator<Item = EdgeId>) -> bool {
        let route: VecDeque<EdgeId> = route.into_iter().collect();
        let changed = route != self.route;
        self.route = route;
        changed
    }

    /// Check that the remaining route is a connected walk from the head of
    /// the current edge.
    pub fn check_route(&self, g: &RoadGraph) -> Result<(), MobilityError> {
        let mut at = self.next_vertex(g)?;
        for &edge in &self.route {
            let e = g.edge(edge)?;
            if e.from != at {
                return Err(MobilityError::DisconnectedRoute {
                    vehicle: self.id,
                    edge,
                    vertex: at,
                });
            }
            at = e.to;
        }
        Ok(())
    }

    /// Drive for `dt` seconds starting at simulation time `now`.
    ///
    /// Time left over after reaching the end of an edge is spent on the next
    /// route edge at that edge's speed.
    pub fn advance(
        &mut self,
        g: &RoadGraph,
        speed_of: impl Fn(EdgeId) -> f64,
        dt: f64,
        now: f64,
    ) -> Result<(), MobilityError> {
        self.expect_state(VehicleState::Active)?;
        let mut remaining = dt;
        loop {
            let edge = g.edge(self.current_edge)?;
            let speed = speed_of(edge.id);
            if !(speed > 0.0 && speed.is_finite()) {
                return Err(MobilityError::BadSpeed {
                    vehicle: self.id,
                    edge: edge.id,
                    speed,
                });
            }
            let to_end = (edge.length - self.offset).max(0.0);
            let need = to_end / speed;
            if need > remaining {
                self.offset += speed * remaining;
                return Ok(());
            }
            remaining -= need;
            self.offset = edge.length;

            match self.route.front().copied() {
                None if edge.to == self.dest => {
                    self.state = VehicleState::Arrived;
                    self.arrive_time = Some(now + (dt - remaining));
                    return Ok(());
                }
                None => {
                    return Err(MobilityError::RouteExhausted {
                        vehicle: self.id,
                        vertex: edge.to,
                        dest: self.dest,
                    })
                }
                Some(next) => {
                    if g.edge(next)?.from != edge.to {
                        return Err(MobilityError::DisconnectedRoute {
                            vehicle: self.id,
                            edge: next,
                            vertex: edge.to,
                        });
                    }
                    self.route.pop_front();
                    self.current_edge = next;
                    self.offset = 0.0;
                }
            }
        }
    }

    fn expect_state(&self, expected: VehicleState) -> Result<(), MobilityError> {
        if self.state == expected {
            Ok(())
        } else {
            Err(MobilityError::WrongState {
                vehicle: self.id,
                state: self.state,
                expected,
            })
        }
    }
}
