#pragma once

#include <string>

namespace fx {

// Same program as samples/buildtree.socal, without main.
inline const char* kBuildTreeFuns = R"(
(data Tree (Node Tree Tree) (Leaf Int))
(layout Tree Factored)

(define (buildtree (loc lt Tree (r1 ((Leaf 0) r2))) (n Int)) (Tree lt)
  (if (<= n 0)
      (letloc ld (projTagLoc lt)
        (letloc li (projFieldLoc Leaf 0 lt)
          (Leaf lt 1)))
      (letloc ld (projTagLoc lt)
        (letloc li (projFieldLoc Leaf 0 lt)
          (letloc lda (+1 ld)
            (letloc la (introLocVec Tree lda ((Leaf 0) li))
              (let m (- n 1)
                (let x (buildtree (la) m)
                  (letloc lb (after Tree la)
                    (let y (buildtree (lb) m)
                      (Node lt x y)))))))))))

(define (sumTree (loc lt Tree (r1 ((Leaf 0) r2))) (t Tree lt)) Int
  (case t
    (Leaf (v) v)
    (Node ((x lx) (y ly))
      (+ (sumTree (lx) x) (sumTree (ly) y)))))
)";

// The else branch of buildtree inlined into main.
inline const char* kBuildTreeMain = R"(
(main
  (letregion r1
    (letregion r2
      (letloc lt (start Tree (r1 ((Leaf 0) r2)))
        (letloc ld (projTagLoc lt)
          (letloc li (projFieldLoc Leaf 0 lt)
            (letloc lda (+1 ld)
              (letloc la (introLocVec Tree lda ((Leaf 0) li))
                (let x (buildtree (la) 1)
                  (letloc lb (after Tree la)
                    (let y (buildtree (lb) 1)
                      (Node lt x y))))))))))))
)";

inline std::string build_tree_program() { return std::string(kBuildTreeFuns) + kBuildTreeMain; }

// main = body inside two regions and a factored start location lt.
inline std::string tree_main(const std::string& body) {
  return std::string(kBuildTreeFuns) + "(main (letregion r1 (letregion r2 (letloc lt (start Tree (r1 ((Leaf 0) r2))) " +
         body + "))))";
}

}  // namespace fx
