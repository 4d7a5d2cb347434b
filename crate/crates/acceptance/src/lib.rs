//! Acceptance checks for `tricast` live in `tests/acceptance.rs`, a
//! stand-alone test target that prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails. Run it with
//! `cargo test -p tricast-acceptance --test acceptance`.
