package p;

public class BetaTest {
    public void testApi() {
        // expect-type: p.Beta
        // expect-method: p.Beta#twice(int)
        // expect-method: p.Beta#thrice(int)
    }
}
