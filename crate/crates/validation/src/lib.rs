//! Acceptance checks for the workspace; everything lives in the
//! `acceptance` test target, which prints one PASS or FAIL line per
//! criterion and exits nonzero if any fails.
