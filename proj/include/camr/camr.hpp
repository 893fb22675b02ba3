#pragma once

#include "camr/core.hpp"
#include "camr/data.hpp"
#include "camr/encoder.hpp"
#include "camr/loss.hpp"
#include "camr/metrics.hpp"
#include "camr/optimizer.hpp"
#include "camr/retrieval.hpp"
#include "camr/store.hpp"
#include "camr/trainer.hpp"
