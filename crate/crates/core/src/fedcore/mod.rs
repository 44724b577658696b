//! FedAvg-P and Scaffold-P: client sampling, local simultaneous SGD on the
//! shared and personal blocks, outer-step merging and control variates.

mod hyper;
mod local;
mod round;
mod sampling;
mod stepsize;

pub use hyper::{Algorithm, HyperParams};
pub use local::{
    aggregate_shared, init_control_variates, local_steps_fedavgp, local_steps_scaffoldp,
    merge_personal, update_client_control, update_server_control,
};
pub use round::{
    init_states, run_round, run_training, ClientState, RoundTrace, ServerState, Trainer,
    TrainingOutput,
};
pub use sampling::sample_clients;
pub use stepsize::{recommended_step_sizes, StepSizeInputs, StepSizeVariant, StepSizes};
