"""Float64 tensors with reverse-mode autodiff, layers, parameters and training."""
