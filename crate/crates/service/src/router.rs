//! Maps method, path and body onto service operations. Every input yields a
//! response; failures use the `{"error": {...}}` envelope.

use infillkit::infill::remote::WireResponse;
use infillkit::wire::{decode_midi, encode_midi, parse_body, ErrorCode, WireError, MAX_BODY_BYTES};
use serde::Serialize;

use crate::messages::{
    AnalyzeRequest, CreateSessionRequest, CreateSessionResponse, ExportResponse,
    InfillRequestMsg, ResolveRequest, SetRolesRequest, SetRolesResponse,
};
use crate::session::SessionService;

pub const API_PREFIX: &str = "/v1";

fn json<T: Serialize>(value: &T) -> WireResponse {
    WireResponse::ok(serde_json::to_string(value).expect("response serializes"))
}

fn respond<T: Serialize>(result: Result<T, WireError>) -> WireResponse {
    match result {
        Ok(v) => json(&v),
        Err(e) => WireResponse::error(&e),
    }
}

enum Route<'a> {
    Health,
    Sessions,
    Generate,
    Session(&'a str, &'a str),
}

fn parse_route(path: &str) -> Option<Route<'_>> {
    let path = path.split('?').next().unwrap_or(path);
    let rest = path.strip_prefix(API_PREFIX)?;
    let parts: Vec<&str> = rest.trim_end_matches('/').split('/').skip(1).collect();
    match parts.as_slice() {
        ["health"] => Some(Route::Health),
        ["sessions"] => Some(Route::Sessions),
        ["generate"] => Some(Route::Generate),
        ["sessions", id, action] if !id.is_empty() => Some(Route::Session(id, action)),
        _ => None,
    }
}

fn method_not_allowed(method: &str, path: &str) -> WireResponse {
    WireResponse::error(&WireError::new(
        ErrorCode::MethodNotAllowed,
        format!("{method} is not allowed on {path}"),
    ))
}

pub fn handle(service: &SessionService, method: &str, path: &str, body: &[u8]) -> WireResponse {
    let Some(route) = parse_route(path) else {
        return WireResponse::error(&WireError::new(ErrorCode::NotFound, format!("no route for {path}")));
    };
    if body.len() > MAX_BODY_BYTES {
        return WireResponse::error(&WireError::new(
            ErrorCode::PayloadTooLarge,
            format!("body exceeds {MAX_BODY_BYTES} bytes"),
        ));
    }
    let Ok(text) = std::str::from_utf8(body) else {
        return WireResponse::error(&WireError::invalid("body is not UTF-8"));
    };
    let get = method.eq_ignore_ascii_case("GET");
    let post = method.eq_ignore_ascii_case("POST");

    match route {
        Route::Health if get => json(&service.health()),
        Route::Sessions if post => respond((|| {
            let req: CreateSessionRequest = parse_body(text)?;
            let midi = decode_midi(&req.midi)?;
            let (session_id, summary) = service.create_session(&midi)?;
            Ok(CreateSessionResponse {
                session_id,
                summary,
            })
        })()),
        Route::Generate if post => service.generate(text),
        Route::Session(id, "roles") if post => respond((|| {
            let req: SetRolesRequest = parse_body(text)?;
            let roles = service.set_roles(id, &req.roles)?;
            Ok(SetRolesResponse { roles })
        })()),
        Route::Session(id, "analyze") if post => respond((|| {
            let req: AnalyzeRequest = parse_body(text)?;
            service.analyze(id, req.origin_bar)
        })()),
        Route::Session(id, "infill") if post => respond((|| {
            let req: InfillRequestMsg = parse_body(text)?;
            service.request_infill(id, &req)
        })()),
        Route::Session(id, "resolve") if post => respond((|| {
            let req: ResolveRequest = parse_body(text)?;
            service.resolve(id, req.keep)
        })()),
        Route::Session(id, "export") if get => respond(
            service
                .export(id)
                .map(|bytes| ExportResponse { midi: encode_midi(&bytes) }),
        ),
        Route::Session(_, action)
            if !matches!(action, "roles" | "analyze" | "infill" | "resolve" | "export") =>
        {
            WireResponse::error(&WireError::new(ErrorCode::NotFound, format!("no route for {path}")))
        }
        _ => method_not_allowed(method, path),
    }
}
