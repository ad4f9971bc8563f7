//! Skill memory: edit cards distilled from improving transitions, strategy
//! sentences and a capacity-bounded, task-keyed store.

mod bank;
mod card;
mod mcs;
mod summarize;

pub use bank::{
    render_skill_block, retrieve_skills, InsertReport, SkillBank, SkillCard, SkillIoError, SkillQuery,
    DEFAULT_CAPACITY, DEFAULT_HARVEST_DELTA,
};
pub use card::{build_edit_card, classify_scaffold, harvest, EditCard, ModificationType, ScaffoldType, Transition};
pub use mcs::{greedy_mapping, mcs_decompose, McsResult, DEFAULT_TIME_CAP, EXACT_ATOM_LIMIT};
pub use summarize::{
    first_sentence, render_summarizer_prompt, render_summarizer_prompt_with, summarize_template,
    ExternalSummarizer, FragmentNames, Summarizer, TemplateSummarizer,
};
