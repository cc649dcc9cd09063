#pragma once

#include "transrac/checkpoint.hpp"
#include "transrac/config.hpp"
#include "transrac/correlation.hpp"
#include "transrac/data.hpp"
#include "transrac/dataset_io.hpp"
#include "transrac/encoder.hpp"
#include "transrac/error.hpp"
#include "transrac/evaluate.hpp"
#include "transrac/gradcheck.hpp"
#include "transrac/model.hpp"
#include "transrac/pipeline.hpp"
#include "transrac/plot.hpp"
#include "transrac/predictor.hpp"
#include "transrac/racf.hpp"
#include "transrac/sampling.hpp"
#include "transrac/targets.hpp"
#include "transrac/tensor.hpp"
#include "transrac/training.hpp"
#include "transrac/synth_config.hpp"
