package p;

public class GammaTest {
    public void testApi() {
        // expect-type: p.Gamma
        // expect-method: p.Gamma#gamma()
    }
}
