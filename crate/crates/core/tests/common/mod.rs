pub mod lps;
