//! Bundled example studies and a generator of random valid studies.

use std::num::NonZeroU32;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::model::*;

pub const BACK_PAIN_JSON: &str = include_str!("../fixtures/back_pain.json");
pub const IBS_DIETS_JSON: &str = include_str!("../fixtures/ibs_diets.json");
pub const CALIBRATION_JSON: &str = include_str!("../fixtures/calibration.json");

fn load(json: &str) -> Study {
    decode_study(json.as_bytes()).expect("bundled fixture decodes")
}

/// Willow bark tea, arnica balm and warming pad against chronic low back pain.
pub fn back_pain() -> Study {
    load(BACK_PAIN_JSON)
}

/// Gluten-free, low-fibre and fructose-free diets against abdominal pain in IBS.
pub fn ibs_diets() -> Study {
    load(IBS_DIETS_JSON)
}

/// Two interventions in a 28-day ABAB design with one fine-grained numeric outcome.
pub fn calibration_study() -> Study {
    load(CALIBRATION_JSON)
}

const WORDS: &[&str] = &[
    "pain",
    "sleep",
    "Rückenschmerzen",
    "café",
    "tea, warm",
    "\"quoted\"",
    "line\nbreak",
    "痛み",
    "🙂",
    "tab\there",
    "back\\slash",
    "",
];

fn text<R: Rng + ?Sized>(rng: &mut R, non_empty: bool) -> String {
    let n = rng.random_range(1..=3);
    let mut out = Vec::new();
    for _ in 0..n {
        out.push(*WORDS.choose(rng).unwrap());
    }
    let joined = out.join(" ");
    if non_empty && joined.trim().is_empty() {
        "text".to_owned()
    } else {
        joined
    }
}

fn time<R: Rng + ?Sized>(rng: &mut R) -> Vec<TimeWindow> {
    let windows = rng.random_range(0..=2);
    let mut hour = rng.random_range(0..6);
    let mut out = Vec::new();
    for _ in 0..windows {
        let length = rng.random_range(1..=4);
        out.push(TimeWindow {
            start: TimeOfDay::new(hour, rng.random_range(0..60)).unwrap(),
            end: TimeOfDay::new(hour + length, 0).unwrap(),
        });
        hour += length + 1;
    }
    out
}

fn slider<R: Rng + ?Sized>(rng: &mut R) -> SliderConfig {
    let step = *[0.1, 0.25, 0.5, 1.0, 2.0, 5.0].choose(rng).unwrap();
    let minimum = rng.random_range(-20..20) as f64 * step;
    let steps = rng.random_range(1..=40);
    let maximum = minimum + steps as f64 * step;
    let initial = minimum + rng.random_range(0..=steps) as f64 * step;
    let annotations = (0..rng.random_range(0..=3))
        .map(|_| Annotation {
            value: minimum + rng.random_range(0..=steps) as f64 * step,
            text: text(rng, false),
        })
        .collect();
    let gradient = rng.random_bool(0.5).then(|| Gradient {
        min_color: Color::parse(&format!("#{:06X}", rng.random_range(0..0x100_0000))).unwrap(),
        max_color: Color::parse(&format!("#{:06x}", rng.random_range(0..0x100_0000))).unwrap(),
    });
    SliderConfig {
        minimum,
        maximum,
        initial,
        step,
        annotations,
        gradient,
    }
}

fn predicate_for<R: Rng + ?Sized>(rng: &mut R, question: &Question) -> Predicate {
    match &question.response {
        ResponseFormat::Boolean {} => Predicate::Boolean { equals: rng.random_bool(0.5) },
        ResponseFormat::Choice { choices, .. } => Predicate::Choice {
            selected: choices.choose(rng).unwrap().id.clone(),
        },
        ResponseFormat::VisualAnalogue(s) | ResponseFormat::AnnotatedScale(s) => {
            let grid = s.grid();
            let operators = [
                Comparison::Less,
                Comparison::LessOrEqual,
                Comparison::Equal,
                Comparison::GreaterOrEqual,
                Comparison::Greater,
            ];
            Predicate::Numeric {
                operator: *operators.choose(rng).unwrap(),
                value: *grid.choose(rng).unwrap(),
            }
        }
    }
}

fn expression_on<R: Rng + ?Sized>(rng: &mut R, question: &Question) -> Expression {
    let mut expr = Expression::value(question.id.clone(), predicate_for(rng, question));
    for _ in 0..rng.random_range(0..=2) {
        expr = Expression::negate(expr);
    }
    expr
}

fn questions<R: Rng + ?Sized>(rng: &mut R, prefix: &str, count: usize) -> Vec<Question> {
    let mut out: Vec<Question> = Vec::with_capacity(count);
    for i in 0..count {
        let response = match rng.random_range(0..4) {
            0 => ResponseFormat::Boolean {},
            1 => ResponseFormat::Choice {
                multiple: rng.random_bool(0.5),
                choices: (0..rng.random_range(2..=4))
                    .map(|c| Choice {
                        id: ChoiceId::new(format!("c{c}")),
                        text: text(rng, true),
                    })
                    .collect(),
            },
            2 => ResponseFormat::VisualAnalogue(slider(rng)),
            _ => ResponseFormat::AnnotatedScale(slider(rng)),
        };
        let default_answer = match &response {
            ResponseFormat::Boolean {} => AnswerValue::Boolean(rng.random_bool(0.5)),
            ResponseFormat::Choice { choices, .. } => AnswerValue::choice([choices[0].id.clone()]),
            ResponseFormat::VisualAnalogue(s) | ResponseFormat::AnnotatedScale(s) => AnswerValue::Number(s.initial),
        };
        let conditional = if i > 0 && rng.random_bool(0.3) {
            let earlier = &out[rng.random_range(0..i)];
            Some(expression_on(rng, earlier))
        } else {
            None
        };
        out.push(Question {
            id: QuestionId::new(format!("{prefix}q{i}")),
            prompt: text(rng, true),
            rationale: text(rng, false),
            response,
            conditional,
            default_answer,
        });
    }
    out
}

fn task<R: Rng + ?Sized>(rng: &mut R, id: String, questionnaire: bool) -> Task {
    let content = if questionnaire {
        let count = rng.random_range(1..=3);
        TaskContent::Questionnaire {
            questions: questions(rng, &format!("{id}_"), count),
        }
    } else {
        TaskContent::Checkmark {}
    };
    Task {
        id: TaskId::new(id),
        title: text(rng, true),
        schedule: time(rng),
        content,
    }
}

/// A random study that passes publish validation.
pub fn random_study<R: Rng + ?Sized>(rng: &mut R) -> Study {
    let interventions: Vec<Intervention> = (0..rng.random_range(2..=4))
        .map(|i| Intervention {
            id: InterventionId::new(format!("intervention_{i}")),
            name: text(rng, true),
            description: text(rng, false),
            icon_name: "icon".into(),
            tasks: (0..rng.random_range(1..=3))
                .map(|t| {
                    let questionnaire = rng.random_bool(0.2);
                    task(rng, format!("i{i}_t{t}"), questionnaire)
                })
                .collect(),
        })
        .collect();
    let observations: Vec<Observation> = (0..rng.random_range(0..=2))
        .map(|o| Observation {
            id: ObservationId::new(format!("observation_{o}")),
            title: text(rng, true),
            task: task(rng, format!("obs{o}"), true),
        })
        .collect();

    let count = rng.random_range(0..=3);
    let eligibility_questions = questions(rng, "elig_", count);
    let eligibility_criteria = if eligibility_questions.is_empty() {
        Vec::new()
    } else {
        (0..rng.random_range(0..=3))
            .map(|c| EligibilityCriterion {
                id: CriterionId::new(format!("criterion_{c}")),
                reason: text(rng, true),
                expression: {
                    let target = eligibility_questions.choose(rng).unwrap();
                    expression_on(rng, target)
                },
            })
            .collect()
    };

    let schedule = StudySchedule {
        number_of_cycles: NonZeroU32::new(rng.random_range(1..=4)).unwrap(),
        phase_duration_days: NonZeroU32::new(rng.random_range(1..=10)).unwrap(),
        include_baseline: rng.random_bool(0.5),
        sequence: *[SequenceKind::Alternating, SequenceKind::Counterbalanced, SequenceKind::Randomized]
            .choose(rng)
            .unwrap(),
    };
    let total = crate::schedule::total_duration_days(&schedule);

    let mut details = StudyDetails {
        intervention_set: InterventionSet { interventions },
        observations,
        eligibility_questions,
        eligibility_criteria,
        schedule,
        consent: (0..rng.random_range(1..=3))
            .map(|c| ConsentItem {
                id: ConsentItemId::new(format!("consent_{c}")),
                title: text(rng, true),
                text: text(rng, true),
                icon_name: "icon".into(),
            })
            .collect(),
        report_specification: ReportSpecification {
            primary: placeholder_section(),
            secondary: Vec::new(),
        },
        results: Vec::new(),
        minimum_study_length_days: NonZeroU32::new(rng.random_range(1..=total)).unwrap(),
    };

    let references = referencable(&details);
    details.report_specification.primary = section(rng, "primary", &references);
    details.report_specification.secondary = (0..rng.random_range(0..=2))
        .map(|s| section(rng, &format!("secondary_{s}"), &references))
        .collect();
    details.results = (0..rng.random_range(0..=3))
        .map(|r| StudyResult {
            id: ExportId::new(format!("result_{r}")),
            reference: references.choose(rng).unwrap().clone(),
            column_name: format!("column_{r}"),
        })
        .collect();

    let metadata = StudyMetadata {
        study_id: StudyId::new(format!("study-{}", rng.random::<u32>())),
        title: text(rng, true),
        description: text(rng, false),
        icon_name: "icon".into(),
        contact: Contact {
            organization: text(rng, false),
            researcher_name: text(rng, false),
            email: "researcher@example.org".into(),
            website: "https://example.org".into(),
        },
        irb: IrbApproval {
            board_name: text(rng, false),
            protocol_number: format!("IRB-{}", rng.random_range(1..10_000)),
        },
        published: rng.random_bool(0.5),
        revision: rng.random_range(0..100),
    };
    Study { metadata, details }
}

fn placeholder_section() -> ReportSection {
    ReportSection {
        id: SectionId::new("placeholder"),
        title: String::new(),
        content: SectionContent::Average {
            reference: DataReference {
                task: TaskId::new(""),
                property: PropertyId::new(""),
                kind: ValueKind::Boolean,
            },
            aggregate: Aggregation::Day,
        },
    }
}

fn referencable(details: &StudyDetails) -> Vec<DataReference> {
    let mut out = Vec::new();
    for task in details.tasks() {
        match &task.content {
            TaskContent::Checkmark {} => out.push(DataReference {
                task: task.id.clone(),
                property: PropertyId::new(COMPLETED_PROPERTY),
                kind: ValueKind::Boolean,
            }),
            TaskContent::Questionnaire { questions } => {
                for q in questions {
                    let kind = match q.response {
                        ResponseFormat::Boolean {} => ValueKind::Boolean,
                        ResponseFormat::Choice { .. } => continue,
                        _ => ValueKind::Numeric,
                    };
                    out.push(DataReference {
                        task: task.id.clone(),
                        property: PropertyId::new(q.id.as_str()),
                        kind,
                    });
                }
            }
        }
    }
    out
}

fn section<R: Rng + ?Sized>(rng: &mut R, id: &str, references: &[DataReference]) -> ReportSection {
    let reference = references.choose(rng).expect("every intervention has a task").clone();
    let content = if rng.random_bool(0.5) {
        SectionContent::LinearRegression {
            reference,
            improvement_direction: if rng.random_bool(0.5) {
                ImprovementDirection::HigherIsBetter
            } else {
                ImprovementDirection::LowerIsBetter
            },
        }
    } else {
        SectionContent::Average {
            reference,
            aggregate: *[Aggregation::Day, Aggregation::Phase, Aggregation::Intervention]
                .choose(rng)
                .unwrap(),
        }
    };
    ReportSection {
        id: SectionId::new(id),
        title: text(rng, true),
        content,
    }
}
