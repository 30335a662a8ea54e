#include <cstddef>
#include <cstdint>
#include <cstring>

extern "C" int64_t reg_callback(void *arg1, int64_t arg2);

static void sink(int) {}

extern "C" int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size)
{
    int64_t v = 0;
    std::memcpy(&v, data, size < sizeof(v) ? size : sizeof(v));
    reg_callback(reinterpret_cast<void *>(&sink), v);
    return 0;
}
