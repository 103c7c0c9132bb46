#pragma once

#include "conformal.hpp"
#include "dataset.hpp"
#include "density.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "feature.hpp"
#include "io.hpp"
#include "iris.hpp"
#include "model_io.hpp"
#include "parallel.hpp"
#include "synthetic.hpp"
