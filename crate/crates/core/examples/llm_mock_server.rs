//! Talks to a local chat-completions endpoint that rate-limits once, showing
//! the retry and the code extracted from the reply.
//!
//! cargo run --example llm_mock_server

use pcaot::backends::mock_server::{chat_body, MockChatServer};
use pcaot::backends::{LlmBackend, LlmEndpoint, OptimizationRequest, PromptStrategy, RetryPolicy, SamplingParams};

fn main() {
    let reply = "Here is a parallel version:\n```c\n#pragma omp parallel for reduction(+:sum)\nfor (int i = 0; i < N; i++)\n    sum += a[i] * a[i];\n```\n";
    let server = MockChatServer::scripted(vec![(429, "{}".into()), (200, chat_body(reply))]).expect("local server");
    let endpoint = LlmEndpoint::from_env(server.url());
    let backend = LlmBackend::new("local-chat", endpoint, SamplingParams::for_model("demo-model"))
        .with_retry(RetryPolicy { max_attempts: 3, base_delay_ms: 50, max_delay_ms: 200 });
    let request = OptimizationRequest {
        section_code: "for (int i = 0; i < N; i++)\n    sum += a[i] * a[i];".into(),
        strategy: Some(PromptStrategy::DIP),
        attempt: 1,
    };
    match backend.request_llm(&request) {
        Ok(c) => println!("{} extracted:\n{}", c.origin, c.code),
        Err(e) => println!("failed: {e}"),
    }
    for (i, r) in server.requests().iter().enumerate() {
        let body = r.json().unwrap_or_default();
        println!("request {}: {} model={} temperature={}", i + 1, r.path, body["model"], body["temperature"]);
    }
}
