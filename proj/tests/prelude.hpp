#pragma once

#include <torch/torch.h>

// c10 defines its own CHECK; doctest's takes precedence in tests.
#undef CHECK
#include <doctest.h>
