use lolaviz::manifest::SessionManifest;
use lolaviz::protocol::*;
use lolaviz::{Event, Monitor, StreamValue};

const MESSAGES: &str = include_str!("../examples/protocol/messages.ndjson");

fn example(name: &str) -> String {
    format!("{}/examples/sessions/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
enum Any {
    In(VizToMonitor),
    Out(MonitorToViz),
}

#[test]
fn fixture_messages_round_trip() {
    for line in MESSAGES.lines() {
        let msg: Any = decode(line.as_bytes()).unwrap_or_else(|e| panic!("{line}: {e}"));
        assert_eq!(encode_line(&msg), line);
        assert_eq!(encode(&msg), format!("{line}\n").into_bytes());
    }
}

#[test]
fn visibility_encoding() {
    let m = VizToMonitor::Visibility { plot: "p1".into(), visible: true };
    assert_eq!(encode(&m), b"{\"type\":\"visibility\",\"plot\":\"p1\",\"visible\":true}\n");
}

#[test]
fn decode_errors() {
    let e = decode::<VizToMonitor>(br#"{"type":"visibility","plot":"p1""#).unwrap_err();
    assert!(matches!(e, DecodeError::Malformed { offset, .. } if offset > 0));
    assert!(matches!(decode_viz(br#"{"type":"zoom"}"#), Err(DecodeError::Malformed { .. })));
    assert_eq!(decode_viz(br#"{"type":"hello","protocol_version":2}"#), Err(DecodeError::VersionMismatch { got: 2 }));
    assert!(matches!(
        decode_viz(br#"{"type":"scale","plot":"p1","pixel_scale":[0.0,1.0]}"#),
        Err(DecodeError::Malformed { .. })
    ));
}

#[test]
fn unknown_fields_are_ignored() {
    let m = decode_viz(br#"{"type":"visibility","plot":"p1","visible":false,"since":3}"#).unwrap();
    assert_eq!(m, VizToMonitor::Visibility { plot: "p1".into(), visible: false });
}

#[test]
fn non_values_travel_as_null() {
    let m = MonitorToViz::Marker(MarkerMsg {
        plot: "p1".into(),
        time: 1.0,
        x: f64::NAN,
        y: 2.0,
        color: None,
        critical: false,
        halo: false,
        count: None,
    });
    assert_eq!(
        encode_line(&m),
        r#"{"type":"marker","plot":"p1","time":1.0,"x":null,"y":2.0,"critical":false,"halo":false}"#
    );
    assert!(LimitsMsg::new("p".into(), (1.0, 1.0), (0.0, 1.0)).degenerate);
    assert!(!LimitsMsg::new("p".into(), (0.0, 1.0), (0.0, 1.0)).degenerate);
}

fn session(name: &str) -> (Session, Vec<lolaviz::Event>) {
    let p = SessionManifest::load(example(name)).unwrap().prepare().unwrap();
    (p.session, p.records)
}

fn hello() -> String {
    encode_line(&VizToMonitor::Hello { protocol_version: PROTOCOL_VERSION })
}

fn errors(out: &[MonitorToViz]) -> usize {
    out.iter().filter(|m| matches!(m, MonitorToViz::Trigger(t) if t.severity == Severity::Error)).count()
}

#[test]
fn hello_rules() {
    let (mut s, _) = session("dense");
    let vis = encode_line(&VizToMonitor::Visibility { plot: "p1".into(), visible: false });
    assert_eq!(errors(&s.handle_line(&vis)), 1);
    let out = s.handle_line(&hello());
    assert!(
        matches!(&out[..], [MonitorToViz::Session(m)] if m.plots.len() == 1 && m.plots[0].pacing == "gps ∨ charge")
    );
    let out = s.handle_line(&hello());
    assert_eq!(errors(&out), 1);
    assert!(s.hello_seen());
    assert_eq!(errors(&s.handle_line("{\"type\":")), 1);
    assert_eq!(errors(&s.handle_line(r#"{"type":"visibility","plot":"p9","visible":true}"#)), 1);
    assert_eq!(errors(&s.handle_line(&vis)), 0);
    s.client_closed();
    assert!(!s.hello_seen());
}

fn markers(out: &[MonitorToViz]) -> Vec<&MarkerMsg> {
    out.iter()
        .filter_map(|m| match m {
            MonitorToViz::Marker(m) => Some(m),
            _ => None,
        })
        .collect()
}

#[test]
fn hidden_plot_emits_no_markers() {
    let (mut s, records) = session("dense");
    s.handle_line(&hello());
    let (before, rest) = records.split_at(100);
    let (hidden, after) = rest.split_at(100);
    let mut out = Vec::new();
    for r in before {
        out.extend(s.accept_event(r).unwrap());
    }
    assert!(!markers(&out).is_empty());
    out = s.handle_line(r#"{"type":"visibility","plot":"p1","visible":false}"#);
    for r in hidden {
        out.extend(s.accept_event(r).unwrap());
    }
    assert!(markers(&out).is_empty());
    out = s.handle_line(r#"{"type":"visibility","plot":"p1","visible":true}"#);
    for r in after {
        out.extend(s.accept_event(r).unwrap());
    }
    assert!(!markers(&out).is_empty());
}

#[test]
fn triggers_are_labelled() {
    let src = include_str!("../examples/specs/battery.lola");
    let monitor = Monitor::from_source(src).unwrap();
    let mut s = Session::new(monitor, src, vec![]);
    let f = StreamValue::Float;
    s.accept_event(&Event::new(0.0).with("charge", f(10.0)).with("time", f(0.0))).unwrap();
    let out = s.accept_event(&Event::new(1.0).with("charge", f(20.0)).with("time", f(1.0))).unwrap();
    match &out[..] {
        [MonitorToViz::Trigger(t)] => {
            assert_eq!(t.message, "δ(charge) / δ(charge_time) > 2.0");
            assert_eq!(t.severity, Severity::Warning);
            assert_eq!(t.time, 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn limits_are_sent_when_they_change() {
    let (mut s, records) = session("basic");
    let mut out = Vec::new();
    for r in &records {
        out.extend(s.accept_event(r).unwrap());
    }
    let limits: Vec<_> = out.iter().filter(|m| matches!(m, MonitorToViz::Limits(_))).collect();
    assert!(limits.len() > 1 && limits.len() < records.len());
    for w in limits.windows(2) {
        assert_ne!(w[0], w[1]);
    }
    let MonitorToViz::Session(m) = s.session_msg() else { unreachable!() };
    assert_eq!(m.plots[0].limits.as_ref().map(|l| MonitorToViz::Limits(l.clone())).as_ref(), limits.last().copied());
}

fn marker(critical: bool, t: f64) -> MonitorToViz {
    MonitorToViz::Marker(MarkerMsg {
        plot: "p1".into(),
        time: t,
        x: 0.0,
        y: 0.0,
        color: None,
        critical,
        halo: false,
        count: None,
    })
}

#[test]
fn queue_drops_oldest_plain_markers() {
    let mut q = OutboundQueue::new(3);
    let trig = MonitorToViz::Trigger(TriggerMsg { time: 0.0, message: "t".into(), severity: Severity::Warning });
    q.push(marker(false, 0.0));
    q.push(marker(true, 1.0));
    q.push(trig.clone());
    q.push(marker(false, 2.0));
    assert_eq!(q.dropped(), 1);
    q.push(marker(false, 3.0));
    assert_eq!(q.drain().collect::<Vec<_>>(), vec![marker(true, 1.0), trig.clone(), marker(false, 3.0)]);
    for i in 0..5 {
        q.push(trig.clone());
        q.push(marker(true, i as f64));
    }
    assert_eq!(q.len(), 10);
}

#[tokio::test]
async fn headless_sink_gets_every_message() {
    let (mut s, records) = session("basic");
    let mut expected = Vec::new();
    {
        let (s2, r2) = session("basic");
        let mut sink = Vec::new();
        let report = run_headless(s2, r2, lolaviz::trace::ReplayMode::AsFast, &mut sink).await.unwrap();
        assert_eq!(report.events, records.len() as u64);
        for r in &records {
            for m in s.accept_event(r).unwrap() {
                expected.extend(encode(&m));
            }
        }
        let end =
            TriggerMsg { time: records.last().unwrap().time, message: END_OF_TRACE.into(), severity: Severity::Info };
        expected.extend(encode(&MonitorToViz::Trigger(end)));
        assert_eq!(String::from_utf8(sink).unwrap(), String::from_utf8(expected).unwrap());
    }
}

#[tokio::test]
async fn realtime_replay_fires_periodic_streams_between_records() {
    let src = "input a: Float64\noutput tick @8Hz := a.hold(or: 0.0)\n";
    let monitor = Monitor::from_source(src).unwrap();
    let s = Session::new(monitor, src, vec![]);
    let records =
        vec![Event::new(0.0).with("a", StreamValue::Float(1.0)), Event::new(0.5).with("a", StreamValue::Float(2.0))];
    let mut sink = Vec::new();
    let start = std::time::Instant::now();
    let report = run_headless(s, records, lolaviz::trace::ReplayMode::Realtime(2.0), &mut sink).await.unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!((0.2..2.0).contains(&elapsed), "{elapsed}");
    assert_eq!(report.events, 2);
    assert_eq!(report.errors, 0);
}

fn schema() -> jsonschema::Validator {
    let text = include_str!("../../../docs/protocol.schema.json");
    jsonschema::validator_for(&serde_json::from_str(text).unwrap()).unwrap()
}

#[test]
fn fixture_messages_match_schema() {
    let schema = schema();
    for line in MESSAGES.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(schema.is_valid(&v), "{line}");
    }
    for bad in [
        r#"{"type":"hello","protocol_version":2}"#,
        r#"{"type":"scale","plot":"p1","pixel_scale":[0.0,1.0]}"#,
        r#"{"type":"marker","plot":"p1","time":1.0,"x":1.0,"y":2.0}"#,
        r#"{"type":"trigger","time":1.0,"message":"m","severity":"fatal"}"#,
    ] {
        assert!(!schema.is_valid(&serde_json::from_str(bad).unwrap()), "{bad}");
    }
}

#[tokio::test]
async fn served_output_matches_schema() {
    let (s, records) = session("priority");
    let mut sink = Vec::new();
    run_headless(s, records, lolaviz::trace::ReplayMode::AsFast, &mut sink).await.unwrap();
    let schema = schema();
    for line in String::from_utf8(sink).unwrap().lines() {
        assert!(schema.is_valid(&serde_json::from_str(line).unwrap()), "{line}");
    }
}
