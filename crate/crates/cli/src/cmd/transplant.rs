use std::fs;
use std::time::Duration;

use anyhow::Context;
use warmstart_core::translate::remote::{HttpTransport, RemoteConfig, RemoteProvider};
use warmstart_core::translate::{
    DictionaryProvider, FetchPolicy, IdentityProvider, TranslationProvider, TranslationTable,
};
use warmstart_core::transplant::{transplant, EmbeddingMatrix};
use warmstart_core::vocab::{load_vocab, TokenId};

use super::{require_file, require_parent, seed_field};
use crate::args::{ProviderKind, TransplantArgs};
use crate::CliError;

pub fn run(a: &TransplantArgs, seed: Option<u64>) -> anyhow::Result<()> {
    require_file("source embedding", &a.src_emb)?;
    require_file("source vocabulary", &a.src_vocab)?;
    require_file("target vocabulary", &a.tgt_vocab)?;
    require_parent("output", &a.out)?;
    if let Some(p) = &a.report {
        require_parent("report", p)?;
    }
    let kind = a.provider.unwrap_or(if a.dict_file.is_some() {
        ProviderKind::Dict
    } else {
        ProviderKind::Identity
    });
    let provider: Box<dyn TranslationProvider> = match kind {
        ProviderKind::Identity => Box::new(IdentityProvider),
        ProviderKind::Dict => {
            let path = a
                .dict_file
                .as_ref()
                .ok_or_else(|| CliError::config("--provider dict needs --dict-file"))?;
            require_file("dictionary", path)?;
            Box::new(DictionaryProvider::load(path).with_context(|| format!("loading dictionary {}", path.display()))?)
        }
        ProviderKind::Remote => {
            let url = a
                .remote_url
                .as_ref()
                .ok_or_else(|| CliError::config("--provider remote needs --remote-url"))?;
            let transport = HttpTransport::new(url.clone(), a.from_lang.clone(), a.to_lang.clone(), a.api_key.clone())
                .context("building HTTP client")?;
            let config = RemoteConfig {
                batch_size: a.batch_size.max(1),
                rate_limit: (a.rate_limit > 0.0).then_some(a.rate_limit),
                timeout: Duration::from_millis(a.timeout_ms),
                max_retries: a.max_retries,
                max_in_flight: a.max_in_flight.max(1),
                ..RemoteConfig::default()
            };
            Box::new(RemoteProvider::new(transport, config))
        }
    };

    let specials = a.specials.ids();
    let src = load_vocab(&a.src_vocab, specials).with_context(|| format!("source vocabulary {}", a.src_vocab.display()))?;
    let tgt = load_vocab(&a.tgt_vocab, specials).with_context(|| format!("target vocabulary {}", a.tgt_vocab.display()))?;
    let emb = EmbeddingMatrix::load(&a.src_emb).with_context(|| format!("source embedding {}", a.src_emb.display()))?;

    let marker = tgt.boundary_marker();
    let table = match &a.cache {
        Some(p) => TranslationTable::open_journaled(p, marker).with_context(|| format!("translation cache {}", p.display()))?,
        None => TranslationTable::new(marker),
    };
    let tokens = tgt
        .tokens()
        .iter()
        .enumerate()
        .filter(|&(id, _)| !tgt.is_special(id as TokenId))
        .map(|(_, t)| t.as_str());
    let policy = FetchPolicy {
        retry_failed: a.retry_failed,
    };
    let stats = table.fetch_all(provider.as_ref(), tokens, policy).context("translating target tokens")?;
    if let Some(p) = &a.cache {
        table.save(p).with_context(|| format!("saving translation cache {}", p.display()))?;
    }

    let (out, report) = transplant(&emb, &src, &tgt, &table)?;
    out.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;

    let mut text = report.to_string();
    text.push_str(&format!(
        "provider={}\ncache_hits={}\nfetched={}\nfetch_translated={}\nfetch_failed={}\nrows={}\ndim={}\nseed={}\n",
        provider.name(),
        stats.cache_hits,
        stats.fetched,
        stats.translated,
        stats.failed,
        out.rows(),
        out.dim(),
        seed_field(seed),
    ));
    match &a.report {
        Some(p) => fs::write(p, text).with_context(|| format!("writing report {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
