//! Seeded generators for desk-scale fixtures: training corpora, reflection
//! page mixes, and a planted snowball world with a known reachability
//! closure. Everything is deterministic in the seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::extract::train_contact_type_model;
use crate::hunter::MockDoc;
use crate::learn::{
    train_multilabel, train_tree_ensemble, EnsembleParams, MaxFeatures, MultiLabelModel,
    TreeEnsembleModel,
};
use crate::textfeat::{binary_ipt_features, contact_segment_features};
use crate::types::{content_digest, normalize_ipt_text, CategoryLabel, ContactKind};

/// Percent-encodes everything outside the RFC 3986 unreserved set.
pub fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 3);
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

const SERVICES: [&str; 8] = [
    "办证刻章",
    "代开发票",
    "网赌上分平台",
    "低价代充会员",
    "原味二手出售",
    "代写论文包过",
    "彩票计划群",
    "海外代购免税",
];

const BENIGN: [&str; 10] = [
    "高清壁纸免费下载 自然风光合集",
    "天气预报 今日多云转晴",
    "菜谱分享 红烧肉的家常做法",
    "历史上的今天 档案资料",
    "城市公园开放时间公告",
    "how to bake bread at home",
    "open source library documentation",
    "博物馆 参观预约须知",
    "小学数学 练习题下载",
    "二十四节气 农事谚语大全",
];

fn digits(rng: &mut ChaCha8Rng, len: usize) -> String {
    let first = rng.gen_range(1..=9u32);
    let mut s = first.to_string();
    for _ in 1..len {
        s.push(char::from_digit(rng.gen_range(0..10), 10).unwrap());
    }
    s
}

fn handle(rng: &mut ChaCha8Rng, len: usize) -> String {
    let letters = "abcdefghijkmnpqrstuvwxyz";
    let mut s = String::new();
    for i in 0..len {
        if i > 0 && rng.gen_bool(0.2) {
            s.push(char::from_digit(rng.gen_range(0..10), 10).unwrap());
        } else {
            s.push(
                letters
                    .chars()
                    .nth(rng.gen_range(0..letters.len()))
                    .unwrap(),
            );
        }
    }
    s
}

/// One synthetic promotion text with bracketed contact segment.
pub fn ipt_text(rng: &mut ChaCha8Rng) -> String {
    let service = SERVICES[rng.gen_range(0..SERVICES.len())];
    let len = rng.gen_range(6..10);
    let contact = match rng.gen_range(0..4) {
        0 => format!("微信:{}", handle(rng, len)),
        1 => format!("加qq{}", digits(rng, len)),
        2 => format!("飞机@{}", handle(rng, len)),
        _ => format!("电话{}", digits(rng, 11)),
    };
    let (open, close) = [("【", "】"), ("[", "]"), ("（", "）")][rng.gen_range(0..3)];
    let mut text = format!("{service}{open}{contact}{close}");
    if rng.gen_bool(0.5) {
        text.push_str(&format!("看shop{}.com", digits(rng, 3)));
    }
    text
}

/// One benign text; some carry digits or a URL so single features do not
/// separate the classes.
pub fn benign_text(rng: &mut ChaCha8Rng) -> String {
    let base = BENIGN[rng.gen_range(0..BENIGN.len())];
    match rng.gen_range(0..4) {
        0 => format!("{base} {}年整理", 2018 + rng.gen_range(0..6)),
        1 => format!("{base} docs.example.org"),
        _ => base.to_string(),
    }
}

/// Labeled corpus for the binary IPT classifier.
pub fn binary_corpus(seed: u64, n_pos: usize, n_neg: usize) -> Vec<(String, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pos + n_neg);
    for _ in 0..n_pos {
        out.push((ipt_text(&mut rng), true));
    }
    for _ in 0..n_neg {
        out.push((benign_text(&mut rng), false));
    }
    out.shuffle(&mut rng);
    out
}

/// Labeled corpus for the contact-segment classifier.
pub fn segment_corpus(seed: u64, n_pos: usize, n_neg: usize) -> Vec<(String, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pos + n_neg);
    for _ in 0..n_pos {
        let len = rng.gen_range(6..10);
        let seg = match rng.gen_range(0..4) {
            0 => format!("微信:{}", handle(&mut rng, len)),
            1 => format!("加qq{}", digits(&mut rng, len)),
            2 => format!("询telegram:@{}", handle(&mut rng, len.min(8))),
            _ => format!("电话{}", digits(&mut rng, 11)),
        };
        out.push((seg, true));
    }
    for _ in 0..n_neg {
        let seg = match rng.gen_range(0..3) {
            0 => SERVICES[rng.gen_range(0..SERVICES.len())].to_string(),
            1 => BENIGN[rng.gen_range(0..BENIGN.len())]
                .split_whitespace()
                .next()
                .unwrap()
                .to_string(),
            _ => format!("{}折优惠", rng.gen_range(2..9)),
        };
        out.push((seg, false));
    }
    out.shuffle(&mut rng);
    out
}

/// Trains a binary ensemble over `BinaryIptFeatures`.
pub fn train_binary_model(
    corpus: &[(String, bool)],
    params: &EnsembleParams,
) -> Result<TreeEnsembleModel> {
    let rows: Vec<Vec<f64>> = corpus
        .iter()
        .map(|(t, _)| binary_ipt_features(t).to_vec())
        .collect();
    let labels: Vec<usize> = corpus.iter().map(|(_, y)| usize::from(*y)).collect();
    train_tree_ensemble(&rows, &labels, Vec::new(), params)
}

/// Trains a binary ensemble over `ContactSegmentFeatures`.
pub fn train_segment_model(
    corpus: &[(String, bool)],
    params: &EnsembleParams,
) -> Result<TreeEnsembleModel> {
    let rows: Vec<Vec<f64>> = corpus
        .iter()
        .map(|(t, _)| contact_segment_features(t).to_vec())
        .collect();
    let labels: Vec<usize> = corpus.iter().map(|(_, y)| usize::from(*y)).collect();
    train_tree_ensemble(&rows, &labels, Vec::new(), params)
}

/// Desk-default binary IPT model on a 200-text synthetic corpus.
pub fn desk_binary_model(seed: u64) -> TreeEnsembleModel {
    let params = EnsembleParams {
        n_estimators: 31,
        seed,
        ..EnsembleParams::default()
    };
    train_binary_model(&binary_corpus(seed, 100, 100), &params).expect("synthetic corpus trains")
}

/// Desk-default contact-segment model on a 200-segment synthetic corpus.
pub fn desk_segment_model(seed: u64) -> TreeEnsembleModel {
    let params = EnsembleParams {
        n_estimators: 31,
        seed: seed.wrapping_add(1),
        ..EnsembleParams::default()
    };
    train_segment_model(&segment_corpus(seed, 100, 100), &params).expect("synthetic corpus trains")
}

/// Labels the desk category model is trained on, with a vocabulary per
/// label. Benign is a trained label so the argmax fallback has somewhere
/// harmless to land.
pub const CATEGORY_LABELS: [CategoryLabel; 5] = [
    CategoryLabel::BlackHatSeoAdvertisement,
    CategoryLabel::FakeCertificate,
    CategoryLabel::FinancialFraud,
    CategoryLabel::Gambling,
    CategoryLabel::Benign,
];

fn category_phrases(label: CategoryLabel) -> &'static [&'static str] {
    match label {
        CategoryLabel::Gambling => &[
            "网赌上分平台 稳定回水",
            "彩票计划群 内部号码",
            "棋牌娱乐城 注册送分",
            "百家乐代理 信誉平台",
            "体育投注 高赔率返水",
        ],
        CategoryLabel::FakeCertificate => &[
            "办证刻章 毕业证学位证",
            "办理真实文凭 当天出证",
            "刻章备案 资质证书齐全",
            "学历认证代办 包过包查",
            "驾驶证办理 全国通用",
        ],
        CategoryLabel::FinancialFraud => &[
            "代开发票 增值税专用",
            "花呗套现 秒到账",
            "低息放款 无抵押贷款",
            "信用卡提额 内部渠道",
            "对公账户走账 手续费低",
        ],
        CategoryLabel::BlackHatSeoAdvertisement => &[
            "百度快排 七天上首页",
            "外链代发 收录保证",
            "关键词排名优化 按天计费",
            "泛目录站群 权重出售",
            "灰词代做 搜索置顶",
        ],
        _ => &[
            "周末读书会照常举行",
            "社区义诊活动预告",
            "第12期例会纪要已上传",
            "春季旅行攻略分享",
            "家常菜食谱更新了",
        ],
    }
}

/// Multi-label corpus: single-label rows per category plus mixed rows
/// that concatenate two categories' phrases.
pub fn category_corpus(seed: u64, per_label: usize) -> Vec<(String, BTreeSet<CategoryLabel>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::new();
    for &label in &CATEGORY_LABELS {
        let phrases = category_phrases(label);
        for i in 0..per_label {
            let phrase = phrases[i % phrases.len()];
            let text = if label == CategoryLabel::Benign {
                format!("{phrase} 第{}期", rng.gen_range(1..99))
            } else {
                let len = rng.gen_range(5..8);
                format!("{phrase} 加微信:{}", handle(&mut rng, len))
            };
            corpus.push((text, BTreeSet::from([label])));
        }
    }
    let illicit: Vec<CategoryLabel> = CATEGORY_LABELS
        .iter()
        .copied()
        .filter(|&l| l != CategoryLabel::Benign)
        .collect();
    for i in 0..per_label {
        let a = illicit[i % illicit.len()];
        let b = illicit[(i + 1) % illicit.len()];
        let pa = category_phrases(a)[i % category_phrases(a).len()];
        let pb = category_phrases(b)[i % category_phrases(b).len()];
        let len = rng.gen_range(5..8);
        let text = format!("{pa} {pb} 飞机@{}", handle(&mut rng, len));
        corpus.push((text, BTreeSet::from([a, b])));
    }
    corpus.shuffle(&mut rng);
    corpus
}

/// Desk-default multi-label category model on a synthetic corpus.
pub fn desk_category_model(seed: u64) -> MultiLabelModel {
    let params = EnsembleParams {
        n_estimators: 15,
        max_features: MaxFeatures::Sqrt,
        seed: seed.wrapping_add(2),
        ..EnsembleParams::default()
    };
    train_multilabel(&category_corpus(seed, 20), &CATEGORY_LABELS, &params)
        .expect("synthetic corpus trains")
}

/// Labeled contact segments for the contact-type classifier.
pub fn contact_type_corpus(seed: u64, per_kind: usize) -> Vec<(String, ContactKind)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..per_kind {
        let h6 = handle(&mut rng, 6);
        let d8 = digits(&mut rng, 8);
        let d11 = format!("1{}", digits(&mut rng, 10));
        let (phone, tg, wx, qq, web, other): (String, String, String, String, String, String) =
            match i % 4 {
                0 => (
                    format!("电话{d11}"),
                    format!("询telegram:@{h6}"),
                    format!("加微信{h6}"),
                    format!("加qq{d8}"),
                    format!("看{h6}.com"),
                    "今天天气不错".into(),
                ),
                1 => (
                    format!("致电+86{d11}"),
                    format!("飞机@{h6}"),
                    format!("微:{h6}"),
                    format!("扣扣:{d8}"),
                    format!("官网 {h6}.net"),
                    "欢迎光临本店".into(),
                ),
                2 => (
                    format!("打{d11}吧"),
                    format!("tg: {h6}"),
                    format!("薇{h6}"),
                    format!("企鹅 {d8}"),
                    format!("访问{h6}.org下单"),
                    "谢谢惠顾".into(),
                ),
                _ => (
                    format!("联系{d11}"),
                    format!("telegram联系@{h6}"),
                    format!("v信:{h6}"),
                    format!("扣{d8}秒回"),
                    format!("主页{h6}.vip"),
                    "正品保障".into(),
                ),
            };
        rows.push((phone, ContactKind::Phone));
        rows.push((tg, ContactKind::Telegram));
        rows.push((wx, ContactKind::WeChat));
        rows.push((qq, ContactKind::Qq));
        rows.push((web, ContactKind::Website));
        rows.push((other, ContactKind::Other));
    }
    rows.shuffle(&mut rng);
    rows
}

/// Desk-default contact-type model.
pub fn desk_contact_type_model(seed: u64) -> TreeEnsembleModel {
    let params = EnsembleParams {
        n_estimators: 31,
        seed: seed.wrapping_add(3),
        ..EnsembleParams::default()
    };
    train_contact_type_model(&contact_type_corpus(seed, 12), &params)
        .expect("synthetic corpus trains")
}

/// One planted promotion and where it lives in the mock world.
#[derive(Debug, Clone)]
pub struct PlantedIpt {
    pub text: String,
    /// IptRecord id the pipeline will assign (digest of normalized text).
    pub id: String,
    pub group: usize,
    pub doc_url: String,
    /// Keywords the extraction pipeline recovers from this text.
    pub keywords: Vec<String>,
}

/// Mock corpus with a known keyword/URS reachability closure.
#[derive(Debug, Clone)]
pub struct SnowballWorld {
    pub docs: Vec<MockDoc>,
    pub seed_keyword: String,
    pub seed_urs_template: String,
    pub planted: Vec<PlantedIpt>,
    /// Ids reachable from the seeds (ground truth closure).
    pub reachable_ipt_ids: BTreeSet<String>,
    /// Ids planted but disconnected from the seeds.
    pub unreachable_ipt_ids: BTreeSet<String>,
}

fn group_template(g: usize) -> String {
    format!("https://portal{g:02}.example.com/search?q={{R}}&src=serp")
}

fn planted_doc(template: &str, text: &str, extra_terms: &[String]) -> MockDoc {
    let url = template.replacen("{R}", &percent_encode(text), 1);
    MockDoc {
        url,
        title: format!("{text} - 搜索结果"),
        snippet: String::new(),
        body_text_by_location: BTreeMap::new(),
        index_terms: extra_terms.to_vec(),
    }
}

/// Builds the planted world. IPT `i` lives in group `i % n_groups` under
/// that group's URS; doc `2i+1` and `2i+2` are indexed under IPT `i`'s two
/// keywords, so keyword search walks a binary tree while `site:` queries
/// recover whole groups. `n_disconnected` extra IPTs use separate groups
/// and keywords nobody extracts.
pub fn snowball_world(
    seed: u64,
    n_ipts: usize,
    n_groups: usize,
    n_disconnected: usize,
) -> SnowballWorld {
    assert!(n_ipts >= 1 && n_groups >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seed_keyword = "seedkw000".to_string();

    let mut planted = Vec::with_capacity(n_ipts);
    for i in 0..n_ipts {
        let service = SERVICES[rng.gen_range(0..SERVICES.len())];
        let text = format!("{service}【微信:wxh{i:03}a】看shop{i:03}a.com");
        let keywords = vec![format!("微信:wxh{i:03}a"), format!("shop{i:03}a.com")];
        let group = i % n_groups;
        let template = group_template(group);
        let url = template.replacen("{R}", &percent_encode(&text), 1);
        planted.push(PlantedIpt {
            id: content_digest(&normalize_ipt_text(&text)),
            text,
            group,
            doc_url: url,
            keywords,
        });
    }

    let mut docs = Vec::new();
    for i in 0..n_ipts {
        // Doc i surfaces under the keyword that discovers it.
        let term = if i == 0 {
            seed_keyword.clone()
        } else {
            let parent = (i - 1) / 2;
            planted[parent].keywords[(i - 1) % 2].clone()
        };
        docs.push(planted_doc(
            &group_template(planted[i].group),
            &planted[i].text,
            &[term],
        ));
    }

    let mut unreachable_ipt_ids = BTreeSet::new();
    for j in 0..n_disconnected {
        let text = format!("孤岛推广{j:03}【微信:iso{j:03}z】");
        unreachable_ipt_ids.insert(content_digest(&normalize_ipt_text(&text)));
        docs.push(planted_doc(
            &group_template(n_groups + j),
            &text,
            &[format!("island{j:03}")],
        ));
    }

    SnowballWorld {
        docs,
        seed_keyword,
        seed_urs_template: group_template(0),
        reachable_ipt_ids: planted.iter().map(|p| p.id.clone()).collect(),
        planted,
        unreachable_ipt_ids,
    }
}

/// Corpus of `n_reflected` pages whose query value reappears in the title
/// plus `n_plain` static pages, shuffled. Returns (docs, reflected urls).
pub fn reflection_mix(seed: u64, n_reflected: usize, n_plain: usize) -> (Vec<MockDoc>, BTreeSet<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut reflected = BTreeSet::new();
    for i in 0..n_reflected {
        let text = ipt_text(&mut rng);
        let url = format!(
            "https://r{i:02}.example.com/find?q={}&n={i}",
            percent_encode(&text)
        );
        reflected.insert(url.clone());
        docs.push(MockDoc {
            url,
            title: format!("{text} 相关页面"),
            snippet: String::new(),
            body_text_by_location: BTreeMap::new(),
            index_terms: vec!["probe".into()],
        });
    }
    for i in 0..n_plain {
        let benign = benign_text(&mut rng);
        let url = match i % 3 {
            // Static page, no parameters at all.
            0 => format!("https://s{i:02}.example.com/about.html"),
            // Parameter present but nothing reflected.
            1 => format!("https://s{i:02}.example.com/page?id={i}"),
            // Short value that decodes under the reflection length floor.
            _ => format!("https://s{i:02}.example.com/page?q=ab"),
        };
        docs.push(MockDoc {
            url,
            title: benign,
            snippet: String::new(),
            body_text_by_location: BTreeMap::new(),
            index_terms: vec!["probe".into()],
        });
    }
    docs.shuffle(&mut rng);
    (docs, reflected)
}
