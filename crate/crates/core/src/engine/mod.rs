pub mod condexp;
