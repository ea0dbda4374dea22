#pragma once

#include "tloho/graph.hpp"
#include "tloho/partition.hpp"
#include "tloho/linalg.hpp"
#include "tloho/model.hpp"
#include "tloho/inference.hpp"
#include "tloho/sampler.hpp"
#include "tloho/shrinkage.hpp"
#include "tloho/simulate.hpp"
#include "tloho/io.hpp"
