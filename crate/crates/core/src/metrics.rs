//! Per-step and per-trip tables, written as CSV.

use std::io::Write;

use serde::Serialize;

use crate::clustering::GroupId;
use crate::graph::VertexId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub time: f64,
    pub active: usize,
    pub arrived: usize,
    pub gossip_records: usize,
    pub sssp_msgs_local: u64,
    pub sssp_msgs_remote: u64,
    pub mean_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripRow {
    pub vehicle_id: u32,
    /// Empty while the vehicle has not departed.
    pub depart: Option<f64>,
    pub arrive: Option<f64>,
    pub trip_time: Option<f64>,
    pub route_changes: u32,
}

/// One group shortest path computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsspRow {
    pub time: f64,
    pub gid: GroupId,
    pub source: VertexId,
    pub msg_local: u64,
    pub msg_remote: u64,
    pub vertices: usize,
    pub settled_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub steps: Vec<StepRow>,
    pub trips: Vec<TripRow>,
    pub sssp: Vec<SsspRow>,
}

impl Metrics {
    pub fn write_steps_csv(&self, out: impl Write) -> csv::Result<()> {
        write_rows(out, &self.steps, STEP_COLUMNS)
    }

    pub fn write_trips_csv(&self, out: impl Write) -> csv::Result<()> {
        write_rows(out, &self.trips, TRIP_COLUMNS)
    }

    pub fn write_sssp_csv(&self, out: impl Write) -> csv::Result<()> {
        write_rows(out, &self.sssp, SSSP_COLUMNS)
    }

    /// Mean trip time over vehicles that arrived.
    pub fn mean_trip_time(&self) -> Option<f64> {
        let times: Vec<f64> = self.trips.iter().filter_map(|t| t.trip_time).collect();
        (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
    }

    pub fn arrived(&self) -> usize {
        self.trips.iter().filter(|t| t.arrive.is_some()).count()
    }
}

pub const STEP_COLUMNS: &[&str] = &[
    "time",
    "active",
    "arrived",
    "gossip_records",
    "sssp_msgs_local",
    "sssp_msgs_remote",
    "mean_density",
];
pub const TRIP_COLUMNS: &[&str] = &["vehicle_id", "depart", "arrive", "trip_time", "route_changes"];
pub const SSSP_COLUMNS: &[&str] = &[
    "time",
    "gid",
    "source",
    "msg_local",
    "msg_remote",
    "vertices",
    "settled_count",
];

// The header is written explicitly so that empty tables still carry it.
fn write_rows<T: Serialize>(out: impl Write, rows: &[T], header: &[&str]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_tables_have_headers() {
        let m = Metrics::default();
        let mut buf = Vec::new();
        m.write_steps_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,active,arrived,gossip_records,sssp_msgs_local,sssp_msgs_remote,mean_density\n"
        );
    }

    #[test]
    fn trip_rows_leave_missing_values_blank() {
        let m = Metrics {
            trips: vec![
                TripRow {
                    vehicle_id: 3,
                    depart: Some(1.0),
                    arrive: Some(41.5),
                    trip_time: Some(40.5),
                    route_changes: 2,
                },
                TripRow {
                    vehicle_id: 4,
                    depart: None,
                    arrive: None,
                    trip_time: None,
                    route_changes: 0,
                },
            ],
            ..Default::default()
        };
        let mut buf = Vec::new();
        m.write_trips_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "vehicle_id,depart,arrive,trip_time,route_changes\n3,1.0,41.5,40.5,2\n4,,,,0\n"
        );
        assert_eq!(m.mean_trip_time(), Some(40.5));
    }
}
