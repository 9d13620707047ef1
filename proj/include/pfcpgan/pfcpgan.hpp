#pragma once

#include "pfcpgan/ablation.hpp"
#include "pfcpgan/checkpoint.hpp"
#include "pfcpgan/config.hpp"
#include "pfcpgan/data.hpp"
#include "pfcpgan/error.hpp"
#include "pfcpgan/evaluator.hpp"
#include "pfcpgan/io.hpp"
#include "pfcpgan/layers.hpp"
#include "pfcpgan/losses.hpp"
#include "pfcpgan/metrics.hpp"
#include "pfcpgan/networks.hpp"
#include "pfcpgan/optim.hpp"
#include "pfcpgan/rng.hpp"
#include "pfcpgan/run_config.hpp"
#include "pfcpgan/runtime.hpp"
#include "pfcpgan/serialize.hpp"
#include "pfcpgan/tensor.hpp"
#include "pfcpgan/trainer.hpp"
