#pragma once

#include "nnkm/error.hpp"
#include "nnkm/random.hpp"
#include "nnkm/kernel.hpp"
#include "nnkm/nnls.hpp"
#include "nnkm/dictionary.hpp"
#include "nnkm/coder.hpp"
#include "nnkm/trainer.hpp"
#include "nnkm/classifier.hpp"
#include "nnkm/dataio.hpp"
#include "nnkm/bench.hpp"
