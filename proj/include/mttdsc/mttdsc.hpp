#pragma once

#include "mttdsc/checkpoint.hpp"
#include "mttdsc/config.hpp"
#include "mttdsc/datasets.hpp"
#include "mttdsc/embeddings.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/eval.hpp"
#include "mttdsc/gradcheck.hpp"
#include "mttdsc/gru.hpp"
#include "mttdsc/models.hpp"
#include "mttdsc/rng.hpp"
#include "mttdsc/sensitivity.hpp"
#include "mttdsc/tensor.hpp"
#include "mttdsc/train.hpp"
