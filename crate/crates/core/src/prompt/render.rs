use super::{CatalystBase, CatalystLabel, PromptState, RootQuery};

/// Plural catalyst label as it appears in the query, e.g. "metal oxide binary catalysts".
pub fn catalyst_label_text(label: CatalystLabel) -> String {
    let base = match label.base {
        CatalystBase::Generic => "catalysts".to_string(),
        other => format!("{}s", other.as_str()),
    };
    if label.oxide {
        format!("metal oxide {base}")
    } else {
        base
    }
}

/// Phrase tying the query to the parent's answer. Empty until a relation is set.
pub fn candidate_statement(state: &PromptState) -> String {
    match (state.relation_to_prev, &state.prev_candidates) {
        (Some(rel), Some(cands)) if !cands.is_empty() => {
            format!("{} [{}]", rel.phrase(), cands.join(", "))
        }
        _ => String::new(),
    }
}

fn property_statement(verb: &str, props: &[String]) -> String {
    if props.is_empty() {
        return String::new();
    }
    format!(
        "You should {verb} candidate catalysts with the following properties: {}.",
        props.join(", ")
    )
}

/// Fills the dataset template with the state's fields.
///
/// Substitution is literal: empty fields leave their surrounding spaces in place.
pub fn render_prompt(state: &PromptState) -> String {
    let label = catalyst_label_text(state.catalyst_label);
    let candidates = candidate_statement(state);
    let include = property_statement("include", &state.include_props);
    let exclude = property_statement("exclude", &state.exclude_props);
    match &state.root_query {
        RootQuery::OpenCatalysis { adsorbate, k } => format!(
            "Generate a list of candidate {label} {candidates} for the adsorption of {adsorbate}. \
             {include} {exclude} Let's think step-by-step and return a list of top {k} answers \
             and their explanations as a list of pairs."
        ),
        RootQuery::BiofuelQr { k, .. } => format!(
            "What are the top-{k} {label} {candidates} that perform the RWGS reaction at a lower \
             temperature (<200 C) and demonstrate higher adsorption energy for both CO2 and H2 \
             (or facilitates both CO2 and H2 adsorption)?. {include} {exclude} Provide scientific \
             explanations and return a list of top {k} answers and their explanations as a list \
             of pairs. Let's think step-by-step."
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::Relation;

    fn normalize(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn oc_root() -> PromptState {
        PromptState::root(RootQuery::OpenCatalysis {
            adsorbate: "*OH".into(),
            k: 5,
        })
    }

    #[test]
    fn open_catalysis_root() {
        let text = render_prompt(&oc_root());
        assert_eq!(
            normalize(&text),
            normalize(
                "Generate a list of candidate catalysts for the adsorption of *OH.   Let's think \
                 step-by-step and return a list of top 5 answers and their explanations as a list \
                 of pairs."
            )
        );
        assert!(text.contains("*OH.   Let's think"));
    }

    #[test]
    fn biofuel_root() {
        let s = PromptState::root(RootQuery::BiofuelQr {
            question_id: "bfr-1".into(),
            k: 3,
        });
        let text = render_prompt(&s);
        assert!(text.contains("top-3"));
        assert!(text.contains("demonstrate higher adsorption energy for both CO2 and H2"));
        assert!(text.contains("return a list of top 3 answers"));
    }

    #[test]
    fn include_statement_names_each_property_once() {
        let mut s = oc_root();
        s.include_props.push("high activity".into());
        let text = render_prompt(&s);
        assert_eq!(text.matches("high activity").count(), 1);
        assert!(text.contains(
            "You should include candidate catalysts with the following properties: high activity."
        ));
        s.exclude_props = vec!["high cost".into(), "high toxicity".into()];
        assert!(render_prompt(&s).contains(
            "You should exclude candidate catalysts with the following properties: high cost, high toxicity."
        ));
    }

    #[test]
    fn candidate_statement_uses_relation_phrase() {
        let mut s = oc_root().with_candidates(&["Pt".into(), "Cu".into()]);
        assert_eq!(candidate_statement(&s), "");
        s.relation_to_prev = Some(Relation::NewElementsTo);
        assert_eq!(
            candidate_statement(&s),
            "that introduce new elements to [Pt, Cu]"
        );
        assert!(normalize(&render_prompt(&s)).starts_with(
            "Generate a list of candidate catalysts that introduce new elements to [Pt, Cu] for the adsorption"
        ));
    }

    #[test]
    fn oxide_and_type_labels() {
        let mut label = CatalystLabel::default();
        assert_eq!(catalyst_label_text(label), "catalysts");
        label.oxide = true;
        assert_eq!(catalyst_label_text(label), "metal oxide catalysts");
        label.base = CatalystBase::Trinary;
        assert_eq!(catalyst_label_text(label), "metal oxide trinary catalysts");
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut s = oc_root();
        s.exclude_props.push("low porosity".into());
        assert_eq!(render_prompt(&s), render_prompt(&s.clone()));
    }
}
