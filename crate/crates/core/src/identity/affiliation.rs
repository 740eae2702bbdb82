use std::collections::BTreeMap;
use std::path::Path;

use super::{Affiliation, DevIdentity};

const PUBLIC_PROVIDERS: &[&str] = &[
    "gmail.com",
    "googlemail.com",
    "yahoo.com",
    "yahoo.co.jp",
    "yahoo.co.uk",
    "ymail.com",
    "hotmail.com",
    "hotmail.co.uk",
    "outlook.com",
    "live.com",
    "msn.com",
    "icloud.com",
    "me.com",
    "mac.com",
    "aol.com",
    "protonmail.com",
    "protonmail.ch",
    "proton.me",
    "pm.me",
    "fastmail.com",
    "fastmail.fm",
    "hey.com",
    "zoho.com",
    "gmx.de",
    "gmx.net",
    "gmx.com",
    "web.de",
    "posteo.de",
    "mail.ru",
    "yandex.ru",
    "yandex.com",
    "qq.com",
    "foxmail.com",
    "163.com",
    "126.com",
    "sina.com",
    "naver.com",
    "hanmail.net",
    "free.fr",
    "orange.fr",
    "laposte.net",
    "tutanota.com",
    "users.noreply.github.com",
    "localhost",
    "localdomain",
    "local",
    "example.com",
    "(none)",
];

const ACADEMIC: &[&str] = &[
    "edu", "ac.uk", "ac.jp", "ac.kr", "ac.in", "ac.cn", "ac.nz", "ac.za", "ac.at", "ac.il", "edu.cn",
    "edu.au", "edu.br", "edu.hk", "edu.tw", "edu.sg", "edu.in", "edu.mx", "edu.tr", "edu.pl",
];

/// Email-domain suffixes that do not indicate an employer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Denylists {
    pub public: Vec<String>,
    pub academic: Vec<String>,
}

impl Default for Denylists {
    fn default() -> Self {
        Self {
            public: PUBLIC_PROVIDERS.iter().map(|s| s.to_string()).collect(),
            academic: ACADEMIC.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Newline-delimited suffix list; blank lines and `#` comments ignored.
pub fn parse_suffix_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().trim_start_matches('.').to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl Denylists {
    pub fn from_files(public: Option<&Path>, academic: Option<&Path>) -> std::io::Result<Self> {
        let mut lists = Denylists::default();
        if let Some(p) = public {
            lists.public = parse_suffix_list(&std::fs::read_to_string(p)?);
        }
        if let Some(p) = academic {
            lists.academic = parse_suffix_list(&std::fs::read_to_string(p)?);
        }
        Ok(lists)
    }

    pub fn is_denied(&self, domain: &str) -> bool {
        let domain = domain.to_lowercase();
        self.public
            .iter()
            .chain(&self.academic)
            .any(|s| domain == *s || domain.ends_with(&format!(".{s}")))
    }
}

pub fn email_domain(email: &str) -> Option<String> {
    let (_, domain) = email.trim().rsplit_once('@')?;
    let domain = domain.trim().trim_end_matches('>').to_lowercase();
    (!domain.is_empty()).then_some(domain)
}

/// Modal non-denylisted domain among `emails` (each occurrence counts once;
/// ties go to the lexicographically first domain).
pub fn affiliation_from_emails<'a, I>(emails: I, denylists: &Denylists) -> Affiliation
where
    I: IntoIterator<Item = &'a str>,
{
    let mut any = false;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for email in emails {
        let Some(domain) = email_domain(email) else { continue };
        any = true;
        if !denylists.is_denied(&domain) {
            *counts.entry(domain).or_default() += 1;
        }
    }
    let best = counts
        .into_iter()
        .fold(None::<(String, usize)>, |best, (d, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((d, c)),
        });
    match (best, any) {
        (Some((domain, _)), _) => Affiliation::Company(domain),
        (None, true) => Affiliation::Independent,
        (None, false) => Affiliation::Unknown,
    }
}

pub fn infer_affiliation(dev: &DevIdentity, denylists: &Denylists) -> Affiliation {
    affiliation_from_emails(dev.emails(), denylists)
}
