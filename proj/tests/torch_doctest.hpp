#pragma once

// torch defines its own CHECK
#include <torch/torch.h>
#undef CHECK

#include <doctest.h>
