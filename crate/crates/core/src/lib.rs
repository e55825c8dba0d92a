pub mod agent;
pub mod belief;
pub mod goal;
pub mod grounding;
pub mod harness;
pub mod llm;
pub mod pddl;
pub mod planner;
pub mod sampling;
pub mod sim;
