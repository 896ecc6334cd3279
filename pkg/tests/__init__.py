# Tests for the adaptive PINN toolkit
