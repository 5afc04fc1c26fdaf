use augbench::augment::{build_dual_class_prompt, build_single_class_prompt};

const GOLDEN: &str = include_str!("golden/dual_prompt.txt");

fn placeholders() -> Vec<String> {
    (1..=5).map(|i| format!("{{example{i}}}")).collect()
}

#[test]
fn dual_prompt_matches_golden_file() {
    let ex = placeholders();
    let prompt = build_dual_class_prompt(&ex, &ex).unwrap();
    assert_eq!(prompt.as_bytes(), GOLDEN.as_bytes());
}

#[test]
fn golden_structure() {
    let prompt = build_dual_class_prompt(&placeholders(), &placeholders()).unwrap();
    assert!(prompt.starts_with("The following tweets belong to the category of 'non-hate speech towards gender':\n\n"));
    assert!(prompt.contains("\n\nThe following tweets belong to the category of 'hate speech towards gender':\n\n"));
    for i in 1..=5 {
        assert_eq!(prompt.matches(&format!("\n{i}. ")).count(), 2, "numbering {i}");
    }
    assert!(prompt.ends_with(
        "Please generate a new tweet that belongs to the category of 'hate speech towards gender'. \
         Important requirement: Generate the tweet in Indonesian language.\nGenerated tweet:"
    ));
}

#[test]
fn concrete_examples_are_inserted_verbatim() {
    let neg = ["dasar politikus korup", "jalan rusak lagi", "harga naik terus", "pemilu curang", "tim kalah"];
    let pos = ["cewek ga usah sok", "perempuan diam saja", "dasar banci", "wanita tahu diri", "emak emak rese"];
    let prompt = build_dual_class_prompt(&neg, &pos).unwrap();
    let expected = GOLDEN
        .split('\n')
        .scan((0usize, 0usize), |(block, _), line| {
            if line.starts_with("The following") {
                *block += 1;
            }
            let out = match line.split_once(". {example") {
                Some((num, _)) => {
                    let i: usize = num.parse().unwrap();
                    let src = if *block == 1 { &neg } else { &pos };
                    format!("{num}. {}", src[i - 1])
                }
                None => line.to_string(),
            };
            Some(out)
        })
        .collect::<Vec<_>>()
        .join("\n");
    assert_eq!(prompt, expected);
}

#[test]
fn wrong_example_counts_are_rejected() {
    let four = ["a", "b", "c", "d"];
    let five = ["a", "b", "c", "d", "e"];
    assert!(build_dual_class_prompt(&four, &five).is_err());
    assert!(build_dual_class_prompt(&five, &four).is_err());
    assert!(build_single_class_prompt::<&str>(&[]).is_err());
}

#[test]
fn single_prompt_has_only_positive_block() {
    let prompt = build_single_class_prompt(&["x y z"]).unwrap();
    assert!(!prompt.contains("non-hate"));
    assert!(prompt.starts_with("The following tweets belong to the category of 'hate speech towards gender':\n\n1. x y z\n\n"));
    assert!(prompt.ends_with("Generated tweet:"));
}
