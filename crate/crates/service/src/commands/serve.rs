use anyhow::Context;

use crate::cli::ServeArgs;
use crate::review::{router, ReviewService};

use super::open_workspace;

pub fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let ws = open_workspace(&a.ws)?;
    let service = ReviewService::new(
        ws,
        a.queue,
        chrono::Duration::seconds(i64::from(a.window_secs.max(1))),
    );
    let app = router(service);
    let addr = format!("{}:{}", a.host, a.port);

    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(mode = ?a.queue, "review service listening on http://{addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("serving")
    })
}
