mod common;

use std::sync::Arc;

use axum::http::StatusCode;
use bwskit::annotation::ResponseSet;
use bwskit::scoring::compute_scores;
use common::*;
use serde_json::json;

#[tokio::test]
async fn exported_scores_match_file_path() {
    let dir = tempfile::tempdir().unwrap();
    let tpl = template(25, 5);
    let app = app(dir.path(), &tpl);
    let sid = create(&app, 3).await;
    // one careless annotator gets refused partway through
    let mut client = Client::new(leak_latent(&tpl.design), &[0.9, 0.85, 1.0, 0.2, 0.95], 11);
    while client.step(&app, &sid).await {}
    assert!(client.rejected.contains(&"ann-3".to_string()));
    assert!(client.rejected.len() < 5);

    let (status, progress) = call_json(&app, "GET", &format!("/sessions/{sid}/progress"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(progress["complete"], true);
    assert_eq!(progress["ordinary_responses"], 150);

    let (status, tsv) = call(&app, "GET", &format!("/sessions/{sid}/export"), None).await;
    assert_eq!(status, StatusCode::OK);
    let exported = ResponseSet::from_tsv(&tsv, Arc::clone(&tpl.design), 3).unwrap();

    let file = dir.path().join("direct.tsv");
    client.direct_set(Arc::clone(&tpl.design), 3).save(&file).unwrap();
    let direct = ResponseSet::load(&file, Arc::clone(&tpl.design), 3).unwrap();

    assert_eq!(exported.len(), direct.len());
    assert_eq!(compute_scores(&exported).unwrap(), compute_scores(&direct).unwrap());
}

#[tokio::test]
async fn restart_loses_no_accepted_response() {
    let tpl = template(25, 5);
    let accuracies = [0.9, 0.8, 1.0];

    let reference_dir = tempfile::tempdir().unwrap();
    let reference = app(reference_dir.path(), &tpl);
    let sid = create(&reference, 2).await;
    let mut client = Client::new(leak_latent(&tpl.design), &accuracies, 5);
    while client.step(&reference, &sid).await {}
    let (_, expected) = call(&reference, "GET", &format!("/sessions/{sid}/export"), None).await;

    let dir = tempfile::tempdir().unwrap();
    let mut client = Client::new(leak_latent(&tpl.design), &accuracies, 5);
    let mut server = app(dir.path(), &tpl);
    let sid = create(&server, 2).await;
    let mut steps = 0;
    loop {
        if steps % 17 == 16 {
            let (_, before) = call(&server, "GET", &format!("/sessions/{sid}/export"), None).await;
            drop(server);
            server = app(dir.path(), &tpl);
            let (_, after) = call(&server, "GET", &format!("/sessions/{sid}/export"), None).await;
            assert_eq!(before, after);
        }
        if !client.step(&server, &sid).await {
            break;
        }
        steps += 1;
    }
    let (_, got) = call(&server, "GET", &format!("/sessions/{sid}/export"), None).await;
    assert_eq!(got, expected);
}

#[tokio::test]
async fn question_payload() {
    let dir = tempfile::tempdir().unwrap();
    let tpl = template(25, 0);
    let app = app(dir.path(), &tpl);
    let sid = create(&app, 1).await;
    let (status, q) = call_json(&app, "GET", &format!("/sessions/{sid}/next?annotator=amy"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(q["prompt_most"], "Which of the four speakers is likely to be the MOST fearful?");
    assert_eq!(q["prompt_least"], "Which of the four speakers is likely to be the LEAST fearful?");
    let speakers = q["speakers"].as_array().unwrap();
    assert_eq!(speakers.len(), 4);
    assert_eq!(speakers[2]["number"], 3);
    let id = speakers[0]["item_id"].as_str().unwrap();
    assert_eq!(speakers[0]["text"], format!("speaker text {id}"));
    assert!(q.get("is_gold").is_none());
    // fetching again repeats the same question
    let (_, again) = call_json(&app, "GET", &format!("/sessions/{sid}/next?annotator=amy"), None).await;
    assert_eq!(again, q);
}

#[tokio::test]
async fn error_responses() {
    let dir = tempfile::tempdir().unwrap();
    let tpl = template(25, 0);
    let app = app(dir.path(), &tpl);
    let sid = create(&app, 3).await;
    let uri = format!("/sessions/{sid}/responses");
    let (_, q) = call_json(&app, "GET", &format!("/sessions/{sid}/next?annotator=bo"), None).await;
    let t = q["tuple_index"].as_u64().unwrap();
    let id = |k: usize| q["speakers"][k]["item_id"].as_str().unwrap().to_string();

    let (status, _) = call(&app, "POST", &uri, Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call_json(&app, "POST", &uri, Some(json!({"annotator": "bo", "tuple_index": t, "best": id(0), "worst": id(0)}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let (status, _) = call_json(&app, "POST", &uri, Some(json!({"annotator": "bo", "tuple_index": t, "best": id(0), "worst": "nobody"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "POST", &uri, Some(json!({"annotator": "bo", "tuple_index": t}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call_json(&app, "POST", &uri, Some(json!({"annotator": "zed", "tuple_index": t, "best": id(0), "worst": id(1)}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_annotator");
    let (status, body) = call_json(&app, "POST", "/sessions/s9999/responses", Some(json!({"annotator": "bo", "tuple_index": t, "best": id(0), "worst": id(1)}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_session");
    let (status, _) = call(&app, "GET", "/sessions/s9999/next?annotator=bo", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", &format!("/sessions/{sid}/next"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "POST", "/sessions", Some(json!({"protocol_version": 2}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let other = (0..tpl.design.n_tuples() as u64).find(|&k| k != t).unwrap();
    let ids = tpl.design.tuple_ids(other as usize).unwrap();
    let (status, body) = call_json(&app, "POST", &uri, Some(json!({"annotator": "bo", "tuple_index": other, "best": ids[0], "worst": ids[1]}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    // the valid answer still goes through afterwards
    let (status, body) = call_json(&app, "POST", &uri, Some(json!({"annotator": "bo", "tuple_index": t, "best": id(0), "worst": id(1)}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["outcome"], "accepted");
}

#[tokio::test]
async fn failing_gold_is_forbidden() {
    let dir = tempfile::tempdir().unwrap();
    let tpl = template(25, 10);
    let app = app(dir.path(), &tpl);
    let sid = create(&app, 3).await;
    let mut rejection = None;
    for _ in 0..60 {
        let (status, q) = call_json(&app, "GET", &format!("/sessions/{sid}/next?annotator=lazy"), None).await;
        assert_eq!(status, StatusCode::OK);
        let t = q["tuple_index"].as_u64().unwrap() as usize;
        // always answers backwards, so every gold is wrong
        let gold = tpl.gold.iter().find(|g| g.tuple_index == t);
        let ids: Vec<String> = (0..4).map(|k| q["speakers"][k]["item_id"].as_str().unwrap().to_string()).collect();
        let (best, worst) = match gold {
            Some(g) => (g.acceptable_worst.iter().next().unwrap().clone(), g.acceptable_best.iter().next().unwrap().clone()),
            None => (ids[0].clone(), ids[1].clone()),
        };
        let body = json!({"annotator": "lazy", "tuple_index": t, "best": best, "worst": worst});
        let (status, out) = call_json(&app, "POST", &format!("/sessions/{sid}/responses"), Some(body)).await;
        assert_eq!(status, StatusCode::OK);
        if out["outcome"] == "rejected_annotator" {
            rejection = Some(out);
            break;
        }
    }
    let out = rejection.expect("annotator never rejected");
    assert!(out["message"].as_str().unwrap().contains("70%"));
    let (status, body) = call_json(&app, "GET", &format!("/sessions/{sid}/next?annotator=lazy"), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert!(body["error"].as_str().unwrap().contains("70%"));
    let (_, progress) = call_json(&app, "GET", &format!("/sessions/{sid}/progress"), None).await;
    assert_eq!(progress["ordinary_responses"], 0);
    assert_eq!(progress["rejected_annotators"], 1);
}
