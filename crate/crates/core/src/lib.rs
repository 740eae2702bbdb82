pub mod calendar;
pub mod identity;
pub mod ingest;
pub mod lifecycle;
pub mod special;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
pub mod survival;
