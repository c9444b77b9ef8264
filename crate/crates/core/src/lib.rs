pub mod lasso;
pub mod numkit;
pub mod sir;
pub mod twostage;
pub mod simlab;
