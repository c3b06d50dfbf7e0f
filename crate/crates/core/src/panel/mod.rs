//! Panel data model: the region × industry × year employment panel, the
//! export-side series, schema-driven CSV ingestion, controls, and
//! estimation-sample assembly.

mod controls;
mod load;
mod sample;
mod types;

pub use controls::{
    build_controls, Controls, ControlsSet, IneligibleRecord, CONTROL_NAMES, PRE_TREND_LONG_LAG,
    PRE_TREND_SHORT_LAG,
};
pub use load::{
    load_destination, load_exports, load_panel, load_world_exports, ColumnMap, ColumnMaps,
    LoadReport, SchemaConfig,
};
pub use sample::{
    build_long_sample, build_sample, ClusterKey, EstimationSample, LongObservation, LongSample,
    Observation, SampleExclusion,
};
pub use types::{
    DestinationData, ExportsSeries, GrowthExclusion, GrowthPolicy, OutcomeSeries, PanelCell,
    RegionPanel, WorldExportsSeries, Year,
};
