mod common;

use std::time::Duration;

use common::*;
use reactor_core::parser::format_term;

#[test]
fn fork_join_in_each_arrival_order() {
    let expected = vec!["Joined for XID=xid_1 with inputs: [c(1),b(1)]".to_string()];
    for order in [["a", "b", "c"], ["a", "c", "b"], ["b", "a", "c"]] {
        assert_eq!(workflow(&order), expected, "{order:?}");
    }
}

#[test]
fn join_waits_for_both_inputs() {
    assert!(workflow(&["a", "c"]).is_empty());
    assert!(workflow(&["b"]).is_empty());
}

#[test]
fn partition_b_path_drops_c_and_e() {
    let (lines, left) = partitions(&["a", "e", "b", "d"]);
    assert_eq!(lines, vec!["via b c1", "detected c1"]);
    assert_eq!(left, 0);
}

#[test]
fn partition_c_path() {
    let (lines, _) = partitions(&["a", "c", "d"]);
    assert_eq!(lines, vec!["via c c1", "detected c1"]);
}

#[test]
fn e_blocks_the_c_path() {
    let (lines, _) = partitions(&["a", "e", "c"]);
    assert!(lines.is_empty(), "{lines:?}");
    let (lines, _) = partitions(&["a", "e", "c", "d"]);
    assert!(lines.is_empty(), "{lines:?}");
}

#[test]
fn ec_demo_interval() {
    let e = engine("ec", EC_DEMO);
    let (_, sols) = e.query("holdsInterval([a,b],Interval)?", None).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(
        format_term(sols[0].get("Interval").unwrap()),
        "[datetime(2005,1,1,0,0,1),datetime(2005,1,1,0,0,10)]"
    );
}

#[test]
fn heartbeat_failover_over_tcp() {
    let f = heartbeat(Duration::from_secs(5));
    let after = f.failover_after.unwrap_or_else(|| panic!("no failover: {:?}", f.lines));
    assert!(after > Duration::from_millis(900), "{after:?}");
    assert_eq!(f.lines.iter().filter(|l| l.starts_with("failover")).count(), 1);
    assert_eq!(f.lines.last().unwrap(), "failover controller from agent to backup");
    assert!(f.loading_added && f.loopback_sent && f.loaded);
}

#[test]
fn thousand_conversations_complete() {
    let (elapsed, lines, peak) = conversations(1000);
    assert_eq!(peak, 1000);
    assert!(conversation_lines_ok(&lines, 1000), "{lines:?}");
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
}

#[test]
fn conversations_share_one_dispatcher() {
    // Thread counts are checked by the acceptance run, which owns its
    // process; here other tests spawn threads alongside.
    let (elapsed, lines, _) = conversations_live(1000, Duration::from_secs(10));
    assert!(conversation_lines_ok(&lines, 1000), "{} lines", lines.len());
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
}

#[test]
fn flight_booking() {
    let b = flight(&["lh1", "af2"]);
    assert_eq!(b.status, reactor_core::eca::EcaStatus::Fired);
    assert_eq!(b.flight.as_deref(), Some("af2"));
    assert_eq!(b.attempts, 2);
    assert_eq!(b.notices, vec!["flightBooked(af2)"]);
    let b = flight(&[]);
    assert_eq!(b.status, reactor_core::eca::EcaStatus::ElseFired);
    assert_eq!(b.notices, vec!["bookedUp(paris)"]);
}
