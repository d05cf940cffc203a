#pragma once

#include "blm/checkpoint.hpp"
#include "blm/cli.hpp"
#include "blm/data.hpp"
#include "blm/dataset_io.hpp"
#include "blm/embeddings.hpp"
#include "blm/error.hpp"
#include "blm/eval.hpp"
#include "blm/generator.hpp"
#include "blm/lexicon.hpp"
#include "blm/model.hpp"
#include "blm/nn.hpp"
#include "blm/random.hpp"
#include "blm/training.hpp"
