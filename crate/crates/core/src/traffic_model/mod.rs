//! Closed-form traffic mathematics of the occupancy process.

mod count;
mod sum;
mod timeline;
mod weibull;

pub use count::{count_prob, CountModelTable, DEFAULT_J_MAX};
pub use sum::{
    fit_moments, fit_sum_weibull, gamma_ratio, sum_cdf, sum_moment, sum_pdf, MomentSet,
    SumWeibullFit, SumWeibullParams,
};
pub use timeline::{
    draw_initial_state, generate_occupancy_timeline, stationary_occupied_probability, Interval,
    OccupancyState, OccupancyTimeline,
};
pub use weibull::{sample_weibull, weibull_moment, WeibullParams};
