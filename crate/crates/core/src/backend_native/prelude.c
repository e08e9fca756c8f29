#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define FLK_OK 0
#define FLK_OVERFLOW 1
#define FLK_NOMEM 2
#define FLK_BADARG 3
#define FLK_END UINT64_MAX
#define FLK_EMPTY UINT32_MAX
#define FLK_MUL 0x9E3779B97F4A7C15ULL
#define FLK_NULL_HASH 0x2545F4914F6CDD1DULL

#define FLK_CREATE 0
#define FLK_FREE 1
#define FLK_NEW_LOCAL 2
#define FLK_FREE_LOCAL 3
#define FLK_SOURCE_LEN 4
#define FLK_RUN 5
#define FLK_MERGE 6
#define FLK_FINISH 7

typedef struct { const uint8_t* p; uint64_t n; } flk_str;
typedef struct { uint64_t loop, begin, end; void* local; } flk_run_args;

static inline uint64_t flk_hash_i64(int64_t x) { return (uint64_t)x * FLK_MUL; }

static inline uint64_t flk_fbits(double x) {
    uint64_t b;
    if (x != x) return 0x7ff8000000000000ULL;
    if (x == 0.0) return 0;
    memcpy(&b, &x, 8);
    return b;
}

static inline uint64_t flk_hash_f64(double x) { return flk_fbits(x) * FLK_MUL; }

static inline uint64_t flk_hash_str(flk_str s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (uint64_t i = 0; i < s.n; i++) {
        h ^= s.p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

static inline uint64_t flk_combine(uint64_t h, uint64_t k) { return (((h << 26) | (h >> 38)) ^ k) * FLK_MUL; }

static inline int flk_str_cmp(flk_str a, flk_str b) {
    uint64_t n = a.n < b.n ? a.n : b.n;
    int c = n ? memcmp(a.p, b.p, n) : 0;
    if (c) return c < 0 ? -1 : 1;
    return a.n < b.n ? -1 : (a.n > b.n ? 1 : 0);
}

static inline int flk_str_eq(flk_str a, flk_str b) { return a.n == b.n && (a.n == 0 || memcmp(a.p, b.p, a.n) == 0); }

static inline int flk_starts(flk_str a, const char* p, uint64_t n) { return a.n >= n && (n == 0 || memcmp(a.p, p, n) == 0); }

/* order key matching Rust's f64::total_cmp */
static inline int64_t flk_tkey(double x) {
    int64_t b;
    memcpy(&b, &x, 8);
    return b ^ (int64_t)((uint64_t)(b >> 63) >> 1);
}

static inline flk_str flk_text(const uint8_t* arena, const uint64_t* off, uint64_t i) {
    flk_str s = { arena + off[i], off[i + 1] - off[i] };
    return s;
}

static inline uint8_t flk_null_at(const uint8_t* valid, uint64_t i) { return valid && !((valid[i >> 3] >> (i & 7)) & 1); }

/* insertion-ordered open addressing: slots hold entry numbers */
typedef struct { uint32_t* slot; uint64_t* h; uint32_t bits; uint64_t n, cap; } flk_index;

static void flk_ix_place(flk_index* ix, uint64_t h, uint32_t e) {
    uint64_t mask = ((uint64_t)1 << ix->bits) - 1, i = h >> (64 - ix->bits);
    while (ix->slot[i] != FLK_EMPTY) i = (i + 1) & mask;
    ix->slot[i] = e;
}

static uint64_t flk_ix_find_start(const flk_index* ix, uint64_t h) { return h >> (64 - ix->bits); }

/* appends an entry with hash h; returns its number or FLK_END */
static uint64_t flk_ix_push(flk_index* ix, uint64_t h) {
    if (!ix->slot) {
        ix->bits = 4;
        ix->slot = malloc(sizeof(uint32_t) << 4);
        if (!ix->slot) return FLK_END;
        memset(ix->slot, 0xff, sizeof(uint32_t) << 4);
    }
    if ((ix->n + 1) * 10 > ((uint64_t)1 << ix->bits) * 7) {
        uint32_t* old = ix->slot;
        uint32_t* s = malloc(sizeof(uint32_t) << (ix->bits + 1));
        if (!s) return FLK_END;
        free(old);
        ix->bits++;
        ix->slot = s;
        memset(s, 0xff, sizeof(uint32_t) << ix->bits);
        for (uint64_t e = 0; e < ix->n; e++) flk_ix_place(ix, ix->h[e], (uint32_t)e);
    }
    if (ix->n == ix->cap) {
        uint64_t cap = ix->cap ? ix->cap * 2 : 16;
        uint64_t* h2 = realloc(ix->h, cap * sizeof(uint64_t));
        if (!h2) return FLK_END;
        ix->h = h2;
        ix->cap = cap;
    }
    ix->h[ix->n] = h;
    flk_ix_place(ix, h, (uint32_t)ix->n);
    return ix->n++;
}

static void flk_ix_free(flk_index* ix) {
    free(ix->slot);
    free(ix->h);
    memset(ix, 0, sizeof *ix);
}

/* grows an array of element size sz to hold at least need elements */
static int flk_grow(void** p, uint64_t* cap, uint64_t need, size_t sz) {
    if (need <= *cap) return 0;
    uint64_t c = *cap ? *cap : 16;
    while (c < need) c *= 2;
    void* q = realloc(*p, c * sz);
    if (!q) return 1;
    *p = q;
    *cap = c;
    return 0;
}
