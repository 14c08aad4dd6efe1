//! Scripted trip sequences on the IEEE-34 layout with the expected label.
//! Fault onset is step 10 and the primary window 18 steps.

use protsim::episode::OutcomeLabel;
use OutcomeLabel::{CoordinationFailure as CF, Correct as OK, FalseNegative as FN, FalsePositive as FP};

pub const STEPS: usize = 60;
const R800: &str = "relay_800";
const R830: &str = "relay_830";

pub type Case = (Option<&'static str>, Vec<(&'static str, usize)>, OutcomeLabel, &'static str);

pub fn cases() -> Vec<Case> {
    // (fault bus, trips, expected label, description)
    vec![
        (None, vec![], OK, "quiet episode"),
        (None, vec![(R830, 5)], FP, "primary trips without a fault"),
        (None, vec![(R800, 50)], FP, "substation trips without a fault"),
        (None, vec![(R830, 5), (R800, 5)], FP, "both trip without a fault"),
        (Some("848"), vec![], FN, "nobody trips"),
        (Some("848"), vec![(R830, 11)], OK, "primary trips on the first fault step"),
        (Some("848"), vec![(R830, 28)], OK, "primary trips on the deadline"),
        (Some("848"), vec![(R830, 29)], FN, "primary one step late"),
        (Some("848"), vec![(R830, 10)], FP, "trip decided before the fault appeared"),
        (Some("848"), vec![(R830, 3)], FP, "trip well before onset"),
        (Some("848"), vec![(R800, 15)], CF, "backup trips before primary, primary never trips"),
        (Some("848"), vec![(R800, 15), (R830, 20)], CF, "backup before primary"),
        (Some("848"), vec![(R830, 15), (R800, 15)], OK, "backup in the same step as primary"),
        (Some("848"), vec![(R830, 15), (R800, 20)], OK, "backup after primary"),
        (Some("848"), vec![(R800, 29)], FN, "primary misses, backup after the deadline"),
        (Some("848"), vec![(R800, 40)], FN, "primary misses, slow backup"),
        (Some("848"), vec![(R830, 29), (R800, 25)], CF, "backup before a late primary"),
        (Some("848"), vec![(R830, 5), (R800, 12)], FP, "early primary trip precedes miscoordination"),
        (Some("890"), vec![(R830, 12)], OK, "fault behind the transformer"),
        (Some("856"), vec![(R830, 20)], OK, "fault on a single-phase lateral below 830"),
        (Some("822"), vec![(R800, 12)], OK, "fault above 830 cleared by the substation"),
        (Some("822"), vec![(R830, 12)], CF, "relay outside the faulted region trips"),
        (Some("822"), vec![(R830, 12), (R800, 14)], CF, "outside trip then correct primary"),
        (Some("822"), vec![], FN, "fault above 830 missed"),
        (Some("822"), vec![(R800, 12), (R830, 40)], CF, "outside trip after clearing"),
        (Some("830"), vec![(R800, 28)], OK, "fault at the relay_830 bus belongs to relay_800"),
        (Some("854"), vec![(R830, 28), (R800, 28)], OK, "both trip on the deadline"),
    ]
}
